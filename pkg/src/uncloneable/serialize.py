"""Plain-text JSON format for ensembles, strategies and attacks.

Complex arrays are stored as ``{"shape": [...], "data": [[re, im], ...]}``
in row-major order.  Ensembles that can be rebuilt from a descriptor (Haar,
Clifford, Pauli, BB84) are stored by reference; anything else is embedded.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import ensembles as ens
from .ensembles import UnitaryEnsemble

FORMAT_VERSION = 1
_REBUILDABLE = {"haar", "clifford", "clifford-orbit", "pauli", "bb84"}


def encode_array(a) -> dict:
    a = np.asarray(a, dtype=complex)
    flat = a.ravel()
    return {"shape": list(a.shape),
            "data": [[float(z.real), float(z.imag)] for z in flat]}


def decode_array(obj: dict) -> np.ndarray:
    data = np.asarray(obj["data"], dtype=float).reshape(-1, 2)
    shape = tuple(obj["shape"])
    if data.shape[0] != int(np.prod(shape)):
        raise ValueError(f"array payload has {data.shape[0]} entries for shape {shape}")
    return (data[:, 0] + 1j * data[:, 1]).reshape(shape)


def encode_ensemble(e: UnitaryEnsemble) -> dict:
    desc = e.describe()
    if desc["kind"] in _REBUILDABLE:
        return {"ref": desc}
    return {"ref": desc, "unitaries": encode_array(e.unitaries),
            "conjugation_closed": e.conjugation_closed}


def decode_ensemble(obj: dict) -> UnitaryEnsemble:
    if "unitaries" in obj:
        return ens.finite(decode_array(obj["unitaries"]), obj["ref"].get("kind", "file"),
                          obj.get("conjugation_closed"))
    from .schemes import ensemble_from_config
    return ensemble_from_config(obj["ref"])


def _envelope(kind: str, body: dict) -> dict:
    return {"format": f"uncloneable/{kind}", "version": FORMAT_VERSION, **body}


def _open(obj: dict | str, kind: str) -> dict:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if obj.get("format") != f"uncloneable/{kind}":
        raise ValueError(f"expected a {kind} document, got {obj.get('format')!r}")
    if obj.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported {kind} format version {obj.get('version')!r}")
    return obj


def ensemble_to_dict(e: UnitaryEnsemble) -> dict:
    if not e.is_exact:
        return _envelope("ensemble", {"ref": e.describe()})
    return _envelope("ensemble", {"ref": e.describe(), "unitaries": encode_array(e.unitaries),
                                  "conjugation_closed": e.conjugation_closed})


def ensemble_from_dict(obj) -> UnitaryEnsemble:
    return decode_ensemble(_open(obj, "ensemble"))


def save_ensemble(e: UnitaryEnsemble, path) -> None:
    Path(path).write_text(json.dumps(ensemble_to_dict(e)), encoding="utf-8")


def load_ensemble(path) -> UnitaryEnsemble:
    return ensemble_from_dict(Path(path).read_text(encoding="utf-8"))


def _tabulated(povm, name: str):
    if callable(povm):
        raise ValueError(f"{name} measurements are callables and cannot be serialized")
    return encode_array(povm)


def strategy_to_dict(game, s) -> dict:
    return _envelope("strategy", {
        "dims": {"A": s.dA, "B": s.dB, "C": s.dC},
        "ensemble": encode_ensemble(game.ensemble),
        "state": encode_array(s.rho),
        "bob": _tabulated(s.bob, "Bob"),
        "charlie": _tabulated(s.charlie, "Charlie"),
    })


def strategy_from_dict(obj):
    from .games import MoeGame, Strategy
    obj = _open(obj, "strategy")
    dims = obj["dims"]
    s = Strategy(dims["B"], dims["C"], decode_array(obj["bob"]), decode_array(obj["charlie"]),
                 decode_array(obj["state"]))
    return MoeGame(decode_ensemble(obj["ensemble"])), s


def attack_to_dict(q, a) -> dict:
    return _envelope("attack", {
        "dims": {"A": a.dA, "B": a.dB, "C": a.dC},
        "scheme": q.to_config(),
        "ensemble": encode_ensemble(q.ensemble),
        "choi": encode_array(a.choi),
        "bob": _tabulated(a.bob, "Bob"),
        "charlie": _tabulated(a.charlie, "Charlie"),
    })


def attack_from_dict(obj):
    from .adversary import CloningAttack
    from .schemes import Qecm
    obj = _open(obj, "attack")
    dims = obj["dims"]
    q = Qecm(decode_ensemble(obj["ensemble"]), seed=obj["scheme"].get("seed"))
    a = CloningAttack(dims["A"], dims["B"], dims["C"], decode_array(obj["choi"]),
                      decode_array(obj["bob"]), decode_array(obj["charlie"]))
    return q, a


def dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True)
