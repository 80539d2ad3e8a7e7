import numpy as np
import pytest

from obbkit.exceptions import ConfigError, DomainError, ParseError, ShapeError
from obbkit.validation import (
    check_choice,
    check_obb_array,
    check_positive_int,
    check_quad_array,
    check_random_state,
    check_unit_interval,
)


def test_parse_error_message_carries_location():
    assert str(ParseError("bad", 3, "x.txt")) == "x.txt:3: bad"
    assert str(ParseError("bad", 3)) == "3: bad"
    assert str(ParseError("bad")) == "bad"
    assert ParseError("bad", 3).lineno == 3


def test_obb_array_promotes_and_rejects():
    assert check_obb_array([1, 2, 3, 4, 0.5]).shape == (1, 5)
    with pytest.raises(ShapeError):
        check_obb_array(np.zeros((2, 4)))
    with pytest.raises(DomainError):
        check_obb_array([0, 0, 0, 1, 0])
    with pytest.raises(DomainError):
        check_obb_array([0, 0, np.nan, 1, 0])


def test_quad_array_shape():
    assert check_quad_array(np.zeros((3, 4, 2))).shape == (3, 4, 2)
    with pytest.raises(ShapeError):
        check_quad_array(np.zeros((3, 2)))


def test_unit_interval_open_and_closed():
    check_unit_interval([0.0, 1.0])
    with pytest.raises(DomainError):
        check_unit_interval([0.0], open_=True)
    with pytest.raises(DomainError):
        check_unit_interval([1.5])


@pytest.mark.parametrize("bad", [0, -1, 1.5, True, "3"])
def test_positive_int_rejects(bad):
    with pytest.raises(ConfigError):
        check_positive_int(bad, "n")


def test_choice():
    assert check_choice("a", {"a", "b"}, "k") == "a"
    with pytest.raises(ConfigError, match="k must be one of"):
        check_choice("c", {"a", "b"}, "k")


def test_random_state():
    g = np.random.default_rng(1)
    assert check_random_state(g) is g
    assert check_random_state(5).random() == np.random.default_rng(5).random()
    with pytest.raises(ConfigError):
        check_random_state(1.5)
