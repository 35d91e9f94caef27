"""
Fixtures compartidas: especificaciones pequeñas y parámetros válidos
tests/conftest.py
"""

import numpy as np
import pytest

from src.models import ModelSpec, SimConfig
from src.parametrizacion import completar_parametros, construir_layout, unpack
from src.simulacion import simulate_panel


def spec_un_factor(**cambios) -> ModelSpec:
    """Un factor dinámico con dos ítems (el segundo con carga libre)"""
    argumentos = dict(
        O1=2, U1=1, O2=2, U2=1,
        loading_pattern_1=[[1.0], [None]],
        loading_pattern_2=[[1.0], [1.0]],
        gamma4_mask=[True],
        fixed={'Q2': [0.1]},
    )
    argumentos.update(cambios)
    return ModelSpec(**argumentos)


def valores_un_factor() -> dict:
    return {
        'Lambda1': [[1.0], [0.9]],
        'R1': [0.3, 0.4],
        'Lambda2': [[1.0], [1.0]],
        'R2': [0.5, 0.5],
        'b1': [[0.0], [0.5]],
        'b2': [[0.1], [0.2]],
        'B3': [[0.6], [0.4]],
        'B4': [[0.05], [0.0]],
        'Q1': [0.2],
        'gamma2': [-0.5],
        'gamma3': [-1.0],
        'gamma4': [0.3],
    }


def parametros_aleatorios(spec: ModelSpec, rng: np.random.Generator, escala: float = 0.3):
    """Cualquier theta real produce un conjunto válido"""
    return unpack(rng.normal(0.0, escala, size=len(construir_layout(spec))), spec)


@pytest.fixture
def spec_pequena() -> ModelSpec:
    return spec_un_factor()


@pytest.fixture
def params_pequenos(spec_pequena):
    return completar_parametros(valores_un_factor(), spec_pequena)


@pytest.fixture
def simulacion_pequena(spec_pequena, params_pequenos):
    return simulate_panel(SimConfig(N=20, T=10, params=params_pequenos, spec=spec_pequena, seed=11))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
