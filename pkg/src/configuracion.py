"""
Configuración declarativa de una corrida (documento YAML)
src/configuracion.py
"""

import copy
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml
from typing_extensions import Self

from src.constants import CORTE_REGIMEN, PRESET_RAPIDO, PRESETS_RPROP
from src.enums import Comando, MetodoErrores, ModoPronostico
from src.excepciones import ErrorConfiguracion
from src.models import ModelSpec, ParameterSet, RpropConfig
from src.parametrizacion import completar_parametros
from src.simulacion import preset_empirico, preset_simulacion

SECCIONES = ('seed', 'jobs', 'model', 'data', 'optimizer', 'evaluation', 'output')
PRESETS_MODELO = {'simulacion': preset_simulacion, 'empirico': preset_empirico}
CLAVES_MODELO = {
    'preset', 'O1', 'U1', 'O2', 'U2', 'loading_pattern_1', 'loading_pattern_2', 'gamma4_mask',
    'diagonal_B', 'class_invariant', 'ordering', 'interaccion_multifactor', 'fixed', 'free',
    'initial_prob_regime1', 'truth',
}
CLAVES_ESTRUCTURALES = ('O1', 'U1', 'O2', 'U2', 'loading_pattern_1', 'loading_pattern_2')
CLAVES_SOBRE_PRESET = {
    'gamma4_mask': 'gamma4_mask', 'diagonal_B': 'diagonal_B', 'class_invariant': 'class_invariant',
    'ordering': 'ordering', 'interaccion_multifactor': 'interaccion_multifactor', 'fixed': 'fixed',
    'free': 'liberados', 'initial_prob_regime1': 'prob_inicial_regimen1',
}
CLAVES_OPTIMIZADOR = {
    'preset', 'delta0', 'eta_plus', 'eta_minus', 'delta_min', 'delta_max', 'patience', 'tol',
    'n_starts', 'max_iter', 'dispersion_inicial', 'h', 'se_methods', 'training_occasions',
}

Ruta = Tuple[str, ...]


def _lineas_nodo(nodo: yaml.Node, prefijo: Ruta = ()) -> Dict[Ruta, int]:
    """Línea (base 1) de cada clave del documento, indexada por su ruta"""
    lineas: Dict[Ruta, int] = {}
    if isinstance(nodo, yaml.MappingNode):
        for clave, valor in nodo.value:
            ruta = prefijo + (str(clave.value),)
            lineas[ruta] = clave.start_mark.line + 1
            lineas.update(_lineas_nodo(valor, ruta))
    return lineas


@dataclass(frozen=True)
class RunConfig:
    """Secciones de una corrida: seed, model, data, optimizer, evaluation, output"""
    seed: int = 0
    jobs: int = 1
    model: Dict[str, Any] = field(default_factory=lambda: {'preset': 'simulacion'})
    data: Dict[str, Any] = field(default_factory=dict)
    optimizer: Dict[str, Any] = field(default_factory=lambda: {'preset': 'simulacion'})
    evaluation: Dict[str, Any] = field(default_factory=dict)
    output: Dict[str, Any] = field(default_factory=lambda: {'dir': 'resultados'})
    lineas: Dict[Ruta, int] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def desde_texto(cls, texto: str) -> Self:
        """Interpreta un documento YAML; los errores de sintaxis llevan su línea"""
        try:
            documento = yaml.safe_load(texto) or {}
            nodo = yaml.compose(texto)
        except yaml.MarkedYAMLError as error:
            linea = error.problem_mark.line + 1 if error.problem_mark else None
            raise ErrorConfiguracion(f"YAML inválido: {error.problem}", linea) from error
        except yaml.YAMLError as error:
            raise ErrorConfiguracion(f"YAML inválido: {error}") from error
        lineas = _lineas_nodo(nodo) if nodo is not None else {}

        if not isinstance(documento, dict):
            raise ErrorConfiguracion("el documento debe ser un mapa de secciones", 1)
        for clave in documento:
            if clave not in SECCIONES:
                raise ErrorConfiguracion(f"sección desconocida '{clave}'", lineas.get((str(clave),)))
        for seccion in ('model', 'data', 'optimizer', 'evaluation', 'output'):
            if seccion in documento and not isinstance(documento[seccion], dict):
                raise ErrorConfiguracion(f"la sección '{seccion}' debe ser un mapa", lineas.get((seccion,)))

        base = cls()
        return cls(
            seed=documento.get('seed', base.seed),
            jobs=documento.get('jobs', base.jobs),
            model=documento.get('model', base.model),
            data=documento.get('data', base.data),
            optimizer=documento.get('optimizer', base.optimizer),
            evaluation=documento.get('evaluation', base.evaluation),
            output=documento.get('output', base.output),
            lineas=lineas,
        )

    @classmethod
    def desde_yaml(cls, ruta: str) -> Self:
        try:
            texto = Path(ruta).read_text(encoding='utf-8')
        except OSError as error:
            raise ErrorConfiguracion(f"no se puede leer la configuración '{ruta}': {error}") from error
        return cls.desde_texto(texto)

    def _linea(self, *ruta: str) -> Optional[int]:
        """Línea de la clave más profunda conocida de la ruta"""
        for largo in range(len(ruta), 0, -1):
            if ruta[:largo] in self.lineas:
                return self.lineas[ruta[:largo]]
        return None

    def _error(self, mensaje: str, *ruta: str) -> ErrorConfiguracion:
        return ErrorConfiguracion(mensaje, self._linea(*ruta))

    def validar(self, comando: Optional[Comando] = None) -> bool:
        """
        Valida la configuración para un comando

        Raises:
            ErrorConfiguracion: con la línea de la clave responsable
        """
        if not isinstance(self.seed, int) or self.seed < 0:
            raise self._error("seed debe ser un entero no negativo", 'seed')
        if not isinstance(self.jobs, int) or self.jobs == 0 or self.jobs < -1:
            raise self._error("jobs debe ser un entero positivo o -1", 'jobs')

        for clave in self.model:
            if clave not in CLAVES_MODELO:
                raise self._error(f"clave de modelo desconocida '{clave}'", 'model', clave)
        for clave in self.optimizer:
            if clave not in CLAVES_OPTIMIZADOR:
                raise self._error(f"clave de optimizador desconocida '{clave}'", 'optimizer', clave)
        self.construir_spec()
        self.construir_rprop()
        self.metodos_errores()

        corte = self.evaluation.get('cutoff', CORTE_REGIMEN)
        if not isinstance(corte, (int, float)) or not 0.0 < corte < 1.0:
            raise self._error("cutoff debe estar en (0, 1)", 'evaluation', 'cutoff')
        split = self.evaluation.get('split')
        if split is not None and (not isinstance(split, int) or split < 1):
            raise self._error("split debe ser un entero positivo", 'evaluation', 'split')
        self.modo_pronostico()
        if not self.output.get('dir'):
            raise self._error("output.dir es obligatorio", 'output')

        if comando is Comando.SIMULATE:
            self._validar_simulacion()
        elif comando is not None:
            self._validar_fuente(comando)
        return True

    def _validar_simulacion(self):
        simulacion = self.data.get('simulation')
        if not isinstance(simulacion, dict):
            raise self._error("simulate requiere la sección data.simulation", 'data')
        for clave in ('N', 'T', 'replications'):
            valor = simulacion.get(clave)
            if not isinstance(valor, int) or valor < 1:
                raise self._error(f"data.simulation.{clave} debe ser un entero positivo",
                                  'data', 'simulation', clave)
        self.parametros_verdaderos(self.construir_spec())

    def _validar_fuente(self, comando: Comando):
        fuentes = [clave for clave in ('files', 'simulated') if self.data.get(clave)]
        if len(fuentes) != 1:
            raise self._error("data debe declarar exactamente una fuente: files o simulated", 'data')
        if fuentes[0] == 'files':
            archivos = self.data['files']
            for clave in ('y1', 'y2'):
                if clave not in archivos:
                    raise self._error(f"falta data.files.{clave}", 'data', 'files')
            for clave, ruta in archivos.items():
                if ruta is not None and not Path(ruta).exists():
                    raise self._error(f"no existe el archivo '{ruta}'", 'data', 'files', clave)
        elif not Path(self.data['simulated']).is_dir():
            raise self._error(f"no existe el directorio '{self.data['simulated']}'", 'data', 'simulated')

    def construir_spec(self) -> ModelSpec:
        """ModelSpec desde un preset o desde la descripción explícita"""
        modelo = self.model
        try:
            if 'preset' in modelo:
                return self._spec_desde_preset(modelo)
            faltantes = [c for c in ('O1', 'U1', 'O2', 'U2', 'loading_pattern_1', 'loading_pattern_2')
                         if c not in modelo]
            if faltantes:
                raise self._error(f"faltan claves del modelo: {', '.join(faltantes)}", 'model')
            return ModelSpec(
                O1=modelo['O1'], U1=modelo['U1'], O2=modelo['O2'], U2=modelo['U2'],
                loading_pattern_1=modelo['loading_pattern_1'],
                loading_pattern_2=modelo['loading_pattern_2'],
                gamma4_mask=modelo.get('gamma4_mask', [False] * modelo['U1']),
                diagonal_B=modelo.get('diagonal_B', True),
                class_invariant=frozenset(modelo.get('class_invariant', ('Lambda1', 'R1', 'Q1'))),
                ordering=modelo.get('ordering', True),
                interaccion_multifactor=modelo.get('interaccion_multifactor', False),
                fixed=modelo.get('fixed', {}),
                liberados=frozenset(modelo.get('free', ())),
                prob_inicial_regimen1=modelo.get('initial_prob_regime1', 1.0),
            )
        except ErrorConfiguracion as error:
            if error.linea is not None:
                raise
            raise self._error(str(error), 'model') from error
        except (TypeError, ValueError) as error:
            raise self._error(f"modelo inválido: {error}", 'model') from error

    def _spec_desde_preset(self, modelo: Dict[str, Any]) -> ModelSpec:
        """Spec del preset con las restricciones declaradas en model aplicadas encima"""
        if modelo['preset'] not in PRESETS_MODELO:
            raise self._error(f"preset de modelo desconocido '{modelo['preset']}'", 'model', 'preset')
        for clave in CLAVES_ESTRUCTURALES:
            if clave in modelo:
                raise self._error(f"'{clave}' es incompatible con preset", 'model', clave)
        spec, _ = PRESETS_MODELO[modelo['preset']]()

        cambios: Dict[str, Any] = {}
        for clave, campo in CLAVES_SOBRE_PRESET.items():
            if clave in modelo:
                cambios[campo] = modelo[clave]
        if not cambios:
            return spec
        liberados = frozenset(cambios.get('liberados', spec.liberados))
        # los valores por defecto ya expandidos no deben chocar con los liberados
        fijos = {grupo: valor for grupo, valor in spec.fixed.items() if grupo not in liberados}
        fijos.update(modelo.get('fixed', {}))
        cambios['fixed'] = fijos
        cambios['liberados'] = liberados
        if 'class_invariant' in cambios:
            cambios['class_invariant'] = frozenset(cambios['class_invariant'])
        return replace(spec, **cambios)

    def parametros_verdaderos(self, spec: ModelSpec) -> ParameterSet:
        """Valores verdaderos para simular: los del preset o model.truth"""
        verdad = self.model.get('truth')
        if verdad is None:
            if 'preset' not in self.model:
                raise self._error("un modelo explícito requiere model.truth para simular", 'model')
            _, params = PRESETS_MODELO[self.model['preset']]()
            fijados = set(self.model.get('fixed', {}))
            if not fijados:
                return params
            # los grupos fijados en model.fixed toman el valor fijo de la spec
            valores = {grupo: valor for grupo, valor in params.a_dict().items() if grupo not in fijados}
            return completar_parametros(valores, spec)
        try:
            return completar_parametros(verdad, spec)
        except (ErrorConfiguracion, ValueError, TypeError) as error:
            raise self._error(f"model.truth inválido: {error}", 'model', 'truth') from error

    def construir_rprop(self) -> RpropConfig:
        """RpropConfig desde el preset del optimizador más los valores explícitos"""
        opciones = dict(self.optimizer)
        preset = opciones.pop('preset', 'simulacion')
        if preset not in PRESETS_RPROP:
            raise self._error(f"preset de optimizador desconocido '{preset}'", 'optimizer', 'preset')
        for clave in ('se_methods', 'training_occasions'):
            opciones.pop(clave, None)
        valores = {**PRESETS_RPROP[preset], **opciones}
        try:
            return RpropConfig(**valores)
        except ErrorConfiguracion as error:
            raise self._error(str(error), 'optimizer') from error
        except TypeError as error:
            raise self._error(f"optimizador inválido: {error}", 'optimizer') from error

    def metodos_errores(self):
        nombres = self.optimizer.get('se_methods', ['opg'])
        try:
            return tuple(MetodoErrores(nombre) for nombre in nombres)
        except ValueError as error:
            raise self._error(f"se_methods inválido: {error}", 'optimizer', 'se_methods') from error

    def modo_pronostico(self) -> ModoPronostico:
        try:
            return ModoPronostico(self.evaluation.get('forecast_mode', ModoPronostico.UN_PASO.value))
        except ValueError as error:
            raise self._error(f"forecast_mode inválido: {error}", 'evaluation', 'forecast_mode') from error

    @property
    def corte(self) -> float:
        return float(self.evaluation.get('cutoff', CORTE_REGIMEN))

    @property
    def directorio_salida(self) -> Path:
        return Path(self.output['dir'])

    def t_entrenamiento(self, T: int) -> int:
        """Ocasiones de entrenamiento: split explícito o la primera mitad"""
        split = self.evaluation.get('split', self.optimizer.get('training_occasions'))
        return T // 2 if split is None else min(int(split), T)

    def aplicar_argumentos(self, seed: Optional[int] = None, out: Optional[str] = None,
                           jobs: Optional[int] = None, rapido: bool = False) -> Self:
        """Copia con los valores de la línea de comandos aplicados"""
        cambios: Dict[str, Any] = {}
        if seed is not None:
            cambios['seed'] = seed
        if jobs is not None:
            cambios['jobs'] = jobs
        if out is not None:
            cambios['output'] = {**self.output, 'dir': out}
        if rapido:
            datos = copy.deepcopy(self.data)
            simulacion = dict(datos.get('simulation') or {})
            simulacion.update({'N': PRESET_RAPIDO['N'], 'T': PRESET_RAPIDO['T'],
                               'replications': PRESET_RAPIDO['replicaciones']})
            datos['simulation'] = simulacion
            cambios['data'] = datos
        return replace(self, **cambios)

    def a_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed,
            'jobs': self.jobs,
            'model': copy.deepcopy(self.model),
            'data': copy.deepcopy(self.data),
            'optimizer': copy.deepcopy(self.optimizer),
            'evaluation': copy.deepcopy(self.evaluation),
            'output': copy.deepcopy(self.output),
        }

    def a_yaml(self) -> str:
        return yaml.safe_dump(self.a_dict(), sort_keys=False, allow_unicode=True)
