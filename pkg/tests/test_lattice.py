import math

import numpy as np
import pytest

from mvkraw import CapExceeded, StateSpace, ValidationError, enumerate_states, simplex_size


def test_simplex_size():
    assert simplex_size(1, 5) == 6
    assert simplex_size(2, 3) == 10
    assert simplex_size(3, 6) == 84
    for n in range(1, 5):
        for N in range(1, 7):
            assert simplex_size(n, N) == math.comb(N + n, n)


def test_graded_lex_order_n2():
    space = StateSpace(2, 2)
    assert space.points == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
    assert space.degrees.tolist() == [0, 1, 1, 2, 2, 2]


def test_graded_lex_order_n1():
    space = StateSpace(1, 3)
    assert space.points == [(0,), (1,), (2,), (3,)]


def test_rank_round_trip():
    space = StateSpace(3, 4)
    for r, x in enumerate(space.points):
        assert space.rank(x) == r
        assert x in space
    assert (4, 4, 4) not in space
    with pytest.raises(ValidationError):
        space.rank((4, 4, 4))
    with pytest.raises(ValidationError):
        space.rank((-1, 0, 0))


def test_neighbor_tables():
    space = StateSpace(2, 3)
    for r, x in enumerate(space.points):
        for j in range(2):
            up = space.up[r, j]
            if sum(x) < 3:
                assert up >= 0
                assert space.points[up] == (x[0] + (j == 0), x[1] + (j == 1))
            else:
                assert up == -1
            down = space.down[r, j]
            if x[j] > 0:
                assert down >= 0
                assert space.points[down] == (x[0] - (j == 0), x[1] - (j == 1))
            else:
                assert down == -1


def test_up_down_inverse():
    rng = np.random.default_rng(20260815)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        N = int(rng.integers(1, 7))
        space = StateSpace(n, N)
        for r in range(space.size):
            for j in range(n):
                up = space.up[r, j]
                if up >= 0:
                    assert space.down[up, j] == r


def test_cap_enforced_before_building():
    with pytest.raises(CapExceeded):
        StateSpace(3, 6, cap=50)
    # generous cap still works
    assert StateSpace(3, 6, cap=84).size == 84


def test_validation():
    with pytest.raises(ValidationError):
        StateSpace(0, 3)
    with pytest.raises(ValidationError):
        StateSpace(2, 0)
    with pytest.raises(ValidationError):
        StateSpace(2, 2.5)


def test_enumerate_states_matches_class():
    space = enumerate_states(2, 4)
    assert isinstance(space, StateSpace)
    assert space.size == simplex_size(2, 4)
    degrees = [sum(x) for x in space.points]
    assert degrees == sorted(degrees)
    # within a degree the order is lexicographic
    for d in range(5):
        block = [x for x in space.points if sum(x) == d]
        assert block == sorted(block)
