import pytest

from orbitdensity import (
    AssembledVector,
    SeparationParams,
    ShiftOperator,
    build_level_budgets,
    dense_family_blocks,
    one_block_family,
)


@pytest.fixture(scope="session")
def params():
    return SeparationParams.with_min_p(1)


@pytest.fixture(scope="session")
def op():
    return ShiftOperator()


@pytest.fixture(scope="session")
def budgets(op):
    return build_level_budgets(op, 6)


@pytest.fixture(scope="session")
def one_block_av(params, op, budgets):
    return AssembledVector(params, op, budgets, one_block_family(budgets))


@pytest.fixture(scope="session")
def enumerated_av(params, op, budgets):
    return AssembledVector(params, op, budgets, dense_family_blocks(budgets))
