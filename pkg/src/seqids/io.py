"""JSON / JSON-Lines persistence for datasets and fitted artifacts."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .actions import AttackAction, AttackType
from .sim import STEP_SECONDS, SampleWindow

DATASET_SCHEMA = "seqids.dataset/1"
SYMBOLIZED_SCHEMA = "seqids.symbolized/1"


class SchemaError(ValueError):
    pass


@dataclass
class Dataset:
    """A list of windows plus the attribute manifest they were recorded with."""

    windows: list
    attribute_names: list
    attribute_kinds: list | None = None
    meta: dict | None = None

    def __len__(self):
        return len(self.windows)

    @property
    def has_labels(self):
        return all(w.actions is not None for w in self.windows)

    def observations(self):
        return np.stack([np.asarray(w.observations, dtype=float) for w in self.windows])

    def actions(self):
        missing = [w.episode_id for w in self.windows if w.actions is None]
        if missing:
            raise SchemaError(f"dataset is missing field 'actions' (episode {missing[0]})")
        return np.array([[int(a) for a in w.actions] for w in self.windows], dtype=int)

    def attack_types(self):
        missing = [w.episode_id for w in self.windows if w.attack_type is None]
        if missing:
            raise SchemaError(f"dataset is missing field 'attack_type' (episode {missing[0]})")
        return np.array([int(w.attack_type) for w in self.windows], dtype=int)

    def t_start_local(self):
        return np.array([-1 if w.t_start_local is None else w.t_start_local for w in self.windows])

    def subset(self, idx):
        return Dataset([self.windows[i] for i in idx], self.attribute_names, self.attribute_kinds, self.meta)


def manifest_path(path):
    return f"{path}.manifest.json"


def dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: corrupt JSON ({exc})") from None


def check_schema(obj, expected, where):
    got = obj.get("schema")
    if got != expected:
        raise SchemaError(f"{where}: schema {got!r} does not match expected {expected!r}")


def _window_record(w, symbolized):
    rec = {"episode_id": int(w.episode_id)}
    if w.attack_type is not None:
        rec["attack_type"] = AttackType(w.attack_type).name
    if w.t_start_local is not None:
        rec["t_start_local"] = int(w.t_start_local)
    if w.t_rand is not None:
        rec["t_rand"] = int(w.t_rand)
    if w.actions is not None:
        rec["actions"] = [AttackAction(a).name for a in w.actions]
    obs = np.asarray(w.observations)
    if symbolized:
        rec["observations"] = [int(s) for s in obs]
    else:
        rec["observations"] = [[float(v) for v in row] for row in obs]
    return rec


def write_dataset(path, dataset, symbolized=False):
    """Write windows as JSON-Lines and the attribute manifest as a sidecar."""
    with open(path, "w") as fh:
        for w in dataset.windows:
            fh.write(dumps(_window_record(w, symbolized)))
            fh.write("\n")
    manifest = {
        "schema": SYMBOLIZED_SCHEMA if symbolized else DATASET_SCHEMA,
        "attributes": list(dataset.attribute_names),
        "attribute_kinds": list(dataset.attribute_kinds) if dataset.attribute_kinds else None,
        "step_seconds": STEP_SECONDS,
        "n_windows": len(dataset.windows),
        "meta": dataset.meta or {},
    }
    write_json(manifest_path(path), manifest)


def read_dataset(path, symbolized=None):
    mpath = manifest_path(path)
    if not os.path.exists(mpath):
        raise SchemaError(f"{path}: attribute manifest {mpath} not found")
    manifest = read_json(mpath)
    schema = manifest.get("schema")
    if schema not in (DATASET_SCHEMA, SYMBOLIZED_SCHEMA):
        raise SchemaError(f"{mpath}: unsupported schema {schema!r}")
    is_sym = schema == SYMBOLIZED_SCHEMA
    if symbolized is not None and symbolized != is_sym:
        kind = "symbolized" if symbolized else "numeric"
        raise SchemaError(f"{path}: expected a {kind} dataset, found schema {schema!r}")
    windows = []
    n_attr = len(manifest["attributes"])
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: corrupt record ({exc})") from None
            if "observations" not in rec:
                raise SchemaError(f"{path}:{lineno}: record is missing field 'observations'")
            try:
                obs = np.asarray(rec["observations"], dtype=int if is_sym else float)
            except (TypeError, ValueError):
                obs = None
            if obs is None and not is_sym:
                raise SchemaError(f"{path}:{lineno}: observation rows must have {n_attr} values")
            if obs is None or (is_sym and obs.ndim != 1):
                raise SchemaError(f"{path}:{lineno}: symbolized observations must be a flat integer list")
            if not is_sym and (obs.ndim != 2 or obs.shape[1] != n_attr):
                raise SchemaError(f"{path}:{lineno}: observation rows must have {n_attr} values")
            actions = rec.get("actions")
            windows.append(SampleWindow(
                episode_id=int(rec.get("episode_id", lineno - 1)),
                attack_type=AttackType.parse(rec["attack_type"]) if "attack_type" in rec else None,
                t_rand=rec.get("t_rand"),
                actions=[AttackAction.parse(a) for a in actions] if actions is not None else None,
                observations=obs,
                t_start_local=rec.get("t_start_local"),
            ))
    return Dataset(windows, manifest["attributes"], manifest.get("attribute_kinds"), manifest.get("meta"))


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(obj):
    return hashlib.sha256(dumps(obj).encode()).hexdigest()[:16]


def simulate_to_dataset(config, windows):
    attrs = config.attributes()
    return Dataset(
        windows,
        [a.name for a in attrs],
        [a.kind for a in attrs],
        {"sim_config": config.to_dict()},
    )
