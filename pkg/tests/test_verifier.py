import copy
import json

import numpy as np
import pytest

from kvcert import constructions as C
from kvcert.matrices import make_rng, random_contraction, random_matrix, random_square_zero
from kvcert.verifier import verify_certificate, verify_file


def _certs():
    rng = make_rng(21)
    x = random_square_zero(4, 2.0, rng)
    return {
        "unipotent": C.unipotent_factor(x),
        "sumof5": C.sumof5(C.n2c_witness(x), random_matrix(4, 1.0, rng)).certificate,
        "commN2": C.commutator_to_squarezeros(random_matrix(3, 1, rng), random_matrix(3, 1, rng)).certificate,
        "commP": C.selfcomm_to_projections(random_contraction(4, rng)).certificate,
        "exp-comm": C.exp_commutator_factor(random_matrix(3, 1, rng), random_matrix(3, 1, rng), 200),
    }


CERTS = _certs()


@pytest.fixture(params=sorted(CERTS))
def cert_dict(request):
    return copy.deepcopy(CERTS[request.param].to_json_dict())


def test_every_kind_passes(cert_dict):
    v = verify_certificate(cert_dict)
    assert v.ok, v.failures
    assert v.residual <= v.tolerance


def test_product_of_commutators_is_unimodular():
    v = verify_certificate(CERTS["unipotent"].to_json_dict())
    assert v.det is not None and abs(v.det - 1) <= 1e-10


def test_tampered_residual_is_caught(cert_dict):
    cert_dict["residual"] = cert_dict["residual"] + 1.0
    assert not verify_certificate(cert_dict).ok


def _first_matrix(node):
    if node.get("type") == "matrix" or ("re" in node and "dim" in node):
        return node
    for key in ("z", "p", "b", "u", "v", "g", "inner"):
        if key in node:
            return _first_matrix(node[key])
    raise AssertionError("no matrix found")


def test_tampered_atom_is_caught(cert_dict):
    if not cert_dict["atoms"]:
        pytest.skip("empty certificate")
    m = _first_matrix(cert_dict["atoms"][0])
    m["re"] = (np.asarray(m["re"]) + 0.01).tolist()
    assert not verify_certificate(cert_dict).ok


def test_non_square_zero_summand_is_caught():
    d = CERTS["commN2"].to_json_dict()
    z = np.eye(3)
    d["atoms"].append({"type": "square_zero", "z": {"dim": 3, "re": z.tolist()}})
    d["atoms"].append({"type": "square_zero", "z": {"dim": 3, "re": (-z).tolist()}})
    v = verify_certificate(d)
    assert not v.ok and any("||" in f for f in v.failures)


def test_wrong_target_for_commutator_product():
    # a group commutator always has det 1, so a det -1 target can never be met
    u = np.diag([1.0, -1.0])
    atom = {"type": "commutator", "u": {"type": "matrix", "dim": 2, "re": u.tolist()},
            "v": {"type": "matrix", "dim": 2, "re": [[1.0, 1.0], [0.0, 1.0]]}}
    d = {"kind": "fake", "claimed_identity": "product-equals-target",
         "target": {"dim": 2, "re": u.tolist()}, "residual": 0.0, "tolerance": 1e-9, "atoms": [atom]}
    v = verify_certificate(d)
    assert not v.ok and abs(v.det - 1) <= 1e-12


def test_bad_projection_is_caught():
    p = 2 * np.diag([1.0, 0.0])
    d = {"kind": "fake", "claimed_identity": "sum-equals-target",
         "target": {"dim": 2, "re": p.tolist()}, "residual": 0.0, "tolerance": 1e-9,
         "atoms": [{"type": "signed_projection", "sign": 1, "p": {"dim": 2, "re": p.tolist()}}]}
    v = verify_certificate(d)
    assert any("projection" in f for f in v.failures)


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(claimed_identity="target-is-nice"),
    lambda d: d["atoms"].append({"type": "teleport"}),
    lambda d: d["target"].update(dim=7),
    lambda d: d.pop("target"),
])
def test_malformed_input_raises(mutate):
    d = CERTS["commN2"].to_json_dict()
    mutate(d)
    with pytest.raises((ValueError, KeyError)):
        verify_certificate(d)


def test_verify_file(tmp_path):
    path = tmp_path / "cert.json"
    path.write_text(json.dumps(CERTS["sumof5"].to_json_dict()))
    assert verify_file(path).ok
