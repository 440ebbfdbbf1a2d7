"""JSON layouts for channel sets and user drops.

Complex numbers are stored as ``[re, im]`` pairs so files stay readable by any
JSON consumer. A channel set is::

    {"num_users": K, "num_antennas": N,
     "users": [{"unpolarformed": [[re, im], ...], "depolarization": [[a, b], [c, d]],
                "weight": 1.0}, ...]}

and a drop is::

    {"users": [{"theta": ..., "phi": ..., "distance": ..., "path_loss": ...,
                "rotation": [alpha, beta, gamma], "weight": ...}, ...]}
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channel import ChannelSet
from .scenario import Drop


def complex_to_pairs(x) -> list:
    x = np.asarray(x, dtype=complex)
    return np.stack([x.real, x.imag], axis=-1).tolist()


def pairs_to_complex(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape[-1] != 2:
        raise ValueError("complex values must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def channel_set_to_dict(ch: ChannelSet) -> dict:
    return {
        "num_users": int(ch.num_users),
        "num_antennas": int(ch.num_antennas),
        "users": [
            {"unpolarformed": complex_to_pairs(h), "depolarization": np.asarray(A, dtype=float).tolist(),
             "weight": float(w)}
            for h, A, w in zip(ch.hlos, ch.depol, ch.weights)
        ],
    }


def channel_set_from_dict(d: dict) -> ChannelSet:
    users = d["users"]
    if not users:
        n = int(d.get("num_antennas", 0))
        return ChannelSet(np.zeros((0, n), complex), np.zeros((0, 2, 2)), np.zeros(0))
    hlos = np.array([pairs_to_complex(u["unpolarformed"]) for u in users])
    depol = np.array([u["depolarization"] for u in users], dtype=float)
    weights = np.array([u.get("weight", 1.0) for u in users], dtype=float)
    if depol.shape[1:] != (2, 2):
        raise ValueError("depolarization matrices must be 2x2")
    return ChannelSet(hlos, depol, weights)


def drop_to_dict(drop: Drop) -> dict:
    return {
        "users": [
            {"theta": float(t), "phi": float(p), "distance": float(r), "path_loss": float(nu),
             "rotation": [float(x) for x in rot], "weight": float(w)}
            for t, p, r, nu, rot, w in zip(drop.theta, drop.phi, drop.distance, drop.path_loss,
                                           drop.rotations, drop.weights)
        ]
    }


def drop_from_dict(d: dict) -> Drop:
    u = d["users"]
    return Drop(
        np.array([x["theta"] for x in u], dtype=float),
        np.array([x["phi"] for x in u], dtype=float),
        np.array([x["distance"] for x in u], dtype=float),
        np.array([x["path_loss"] for x in u], dtype=float),
        np.array([x["rotation"] for x in u], dtype=float).reshape(-1, 3),
        np.array([x.get("weight", 1.0) for x in u], dtype=float),
    )


def save_channel_sets(sets, path) -> None:
    Path(path).write_text(json.dumps([channel_set_to_dict(c) for c in sets]))


def load_channel_sets(path) -> list[ChannelSet]:
    return [channel_set_from_dict(d) for d in json.loads(Path(path).read_text())]


def save_drops(drops, path) -> None:
    Path(path).write_text(json.dumps([drop_to_dict(d) for d in drops]))


def load_drops(path) -> list[Drop]:
    return [drop_from_dict(d) for d in json.loads(Path(path).read_text())]
