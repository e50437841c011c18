import json

import numpy as np
import pytest

from varjack import families as fam
from varjack.model import FiniteDistribution, ProductSpace


def test_parity_values():
    f = fam.parity(3)
    assert f([1, 1, 1]) == 1.0
    assert f([0, 1, 1]) == -1.0


def test_prefix_product_default_half():
    f = fam.prefix_product(6)
    assert f([1, 1, 1, 0, 0, 0]) == 1.0
    assert f([1, 1, 0, 1, 1, 1]) == 0.0


def test_tribes():
    f = fam.tribes(4, 2)
    assert f([0, 1, 1, 1]) == 1.0
    assert f([0, 1, 1, 0]) == 0.0


def test_multilinear_matches_hand_expansion():
    f = fam.multilinear(3, {0: 2.0, 0b101: -1.5}, values=(-1.0, 1.0))
    x = np.array([1, 0, 0])
    assert f(x) == pytest.approx(2.0 - 1.5 * (1 * -1))


def test_space_from_config_forms():
    assert fam.space_from_config({"n": 3, "p": 0.3}).coords[0].probs == (0.7, 0.3)
    assert fam.space_from_config({"n": 2, "alphabet": 4}).shape == (4, 4)
    s = fam.space_from_config({"n": 2, "probs": [[0.5, 0.5], [0.2, 0.3, 0.5]]})
    assert s.shape == (2, 3)
    s = fam.space_from_config({"coords": [{"atoms": [0, 5], "probs": [0.5, 0.5]}]})
    assert s.coords[0].atoms == (0, 5)


def test_load_instance_from_file(tmp_path):
    cfg = {"space": {"n": 4, "alphabet": 2}, "function": {"family": "lcs"}}
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(cfg))
    space, f = fam.load_instance(path)
    assert space.n == 4 and f([0, 1, 0, 1]) == 2.0


def test_unknown_family():
    with pytest.raises(ValueError, match="unknown function family"):
        fam.function_from_config({"family": "nope"}, ProductSpace.iid(FiniteDistribution.uniform(2), 2))


def test_gaussian_poly_family():
    space = fam.rademacher(4)
    f = fam.function_from_config({"family": "gaussian_poly", "coeffs": [0, 0, 1]}, space)
    assert f([1, 1, 1, 1]) == pytest.approx(4.0)
