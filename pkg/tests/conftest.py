"""Shared fixture models used across the suite."""

import pytest

from ksfield.coords import VarTable
from ksfield.expr import parse
from ksfield.hamiltonian import HamiltonianModel
from ksfield.lagrangian import LagrangianModel


def lagrangian_model(n, k, source):
    table = VarTable(n, k)
    return LagrangianModel(table, parse(source, table.velocity_chart))


def hamiltonian_model(n, k, source):
    table = VarTable(n, k)
    return HamiltonianModel(table, parse(source, table.momentum_chart))


@pytest.fixture
def free_model():
    """n=1, k=2 free field: L = (v1^2 + v2^2)/2."""
    return lagrangian_model(1, 2, "(v1_1^2 + v1_2^2)/2")


@pytest.fixture
def wave_model():
    """n=1, k=2 wave: L = (v1^2 - v2^2)/2, EL equation phi_tt = phi_xx."""
    return lagrangian_model(1, 2, "(v1_1^2 - v1_2^2)/2")


@pytest.fixture
def kg_model():
    """Klein-Gordon with unit mass: wave Lagrangian minus q^2/2."""
    return lagrangian_model(1, 2, "(v1_1^2 - v1_2^2)/2 - q1^2/2")


@pytest.fixture
def rotational_model():
    """n=2, k=2 rotationally symmetric quadratic Lagrangian."""
    return lagrangian_model(2, 2, "(v1_1^2 + v2_1^2 + v1_2^2 + v2_2^2)/2")


@pytest.fixture
def gauge_shifted_model():
    """Wave Lagrangian plus a closed-one-form term and a constant."""
    return lagrangian_model(1, 2, "(v1_1^2 - v1_2^2)/2 + 3*v1_1 + 2")


@pytest.fixture
def oscillator_model():
    """k=1 harmonic oscillator, L = v^2/2 - q^2/2."""
    return lagrangian_model(1, 1, "v1_1^2/2 - q1^2/2")


@pytest.fixture
def free_hamiltonian():
    """n=1, k=2 free Hamiltonian H = (p1^2 + p2^2)/2."""
    return hamiltonian_model(1, 2, "(p1_1^2 + p2_1^2)/2")


@pytest.fixture
def wave_hamiltonian():
    """Legendre image of the wave Lagrangian: H = (p1^2 - p2^2)/2."""
    return hamiltonian_model(1, 2, "(p1_1^2 - p2_1^2)/2")


def rotation_field(table):
    """Z = q2 d/dq1 - q1 d/dq2 on n = 2."""
    from ksfield.bundles import VectorFieldQ
    from ksfield.expr import Neg, Var

    return VectorFieldQ(table, (Var("q2"), Neg(Var("q1"))))


def rng_points(rng, count, dim, scale=1.0):
    return [scale * rng.uniform(-1, 1, size=dim) for _ in range(count)]
