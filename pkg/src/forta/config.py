"""Strict INI-style run configuration.

Sections: protocol, codec, sharing, task, attack, theory, output.  Unknown
sections or keys are errors; every constraint violation names the offending
key.  The FORTA_SEED environment variable overrides the configured seed.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace

from .adversary import AttackSpec, KINDS
from .errors import InvalidConfiguration
from .harness import TrainingConfig
from .robust_select import RULES

_SCHEMA = {
    "protocol": {
        "n_users": int, "collusion": int, "byzantine": int, "select_m": int,
        "rounds": int, "learning_rate": float, "batch_size": int,
        "weight_decay": float,
        "aggregation": str, "rules": str, "seed": int, "temperature": float,
        "hint_floor": float, "local_epochs": int,
    },
    "codec": {
        "rank_tolerance": float, "noise_floor": float, "evidence_floor": float,
    },
    "sharing": {
        "privacy_sigma": float, "injected_precision_sigma": float,
    },
    "task": {
        "kind": str, "features": int, "classes": int, "cluster_spread": float,
        "center_scale": float, "samples_per_user": int, "test_samples": int,
        "csv_path": str,
    },
    "attack": {
        "kind": str, "magnitude": float, "byzantine": str, "collusion": str,
        "mimic_margin": float,
    },
    "theory": {
        "sigma_g": float, "sigma_eps": float, "g_norm": float,
        "mu_t": float, "sigma_t": float, "mu_q": float, "sigma_q": float,
        "c1": float, "surrogate_samples": int,
    },
    "output": {
        "directory": str, "plots": bool,
    },
}

_DEFAULTS = {
    "protocol": {"n_users": 30, "collusion": 9, "byzantine": 10, "select_m": 8,
                 "rounds": 50, "learning_rate": 0.5, "batch_size": 32,
                 "weight_decay": 1.2,
                 "aggregation": "mean", "rules": "fedavg,krum,modified_krum",
                 "seed": 0, "temperature": 0.1, "hint_floor": 0.05,
                 "local_epochs": 1},
    "codec": {"rank_tolerance": 1e-4, "noise_floor": 1e-9, "evidence_floor": 1e-12},
    "sharing": {"privacy_sigma": 1.0, "injected_precision_sigma": 0.0},
    "task": {"kind": "blobs", "features": 16, "classes": 4, "cluster_spread": 0.25,
             "center_scale": 0.5, "samples_per_user": 200, "test_samples": 2000,
             "csv_path": ""},
    "attack": {"kind": "none", "magnitude": 0.0, "byzantine": "auto",
               "collusion": "auto", "mimic_margin": 0.9},
    "theory": {"sigma_g": 0.01, "sigma_eps": 0.01, "g_norm": 1.0,
               "mu_t": 0.0, "sigma_t": 0.0, "mu_q": 0.0, "sigma_q": 0.0,
               "c1": 0.0, "surrogate_samples": 5000},
    "output": {"directory": "forta_out", "plots": True},
}


@dataclass
class RunConfig:
    training: TrainingConfig
    rules: tuple
    theory: dict
    outdir: str
    plots: bool

    def for_rule(self, rule: str) -> TrainingConfig:
        return replace(self.training, rule=rule)


def _parse_bool(key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise InvalidConfiguration(f"{key}: expected a boolean, got {raw!r}")


def _parse_user_list(key, raw, auto_count):
    raw = raw.strip()
    if raw in ("auto", ""):
        return tuple(range(1, auto_count + 1))
    try:
        return tuple(sorted({int(tok) for tok in raw.split(",")}))
    except ValueError:
        raise InvalidConfiguration(f"{key}: expected 'auto' or a comma list of user indices")


def parse_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    if not os.path.exists(path):
        raise InvalidConfiguration(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise InvalidConfiguration(f"{path}: {exc}")

    values = {sec: dict(defaults) for sec, defaults in _DEFAULTS.items()}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise InvalidConfiguration(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise InvalidConfiguration(f"{path}: unknown key {section}.{key}")
            typ = _SCHEMA[section][key]
            try:
                if typ is bool:
                    values[section][key] = _parse_bool(f"{section}.{key}", raw)
                elif typ is str:
                    values[section][key] = raw.strip()
                else:
                    values[section][key] = typ(raw)
            except ValueError:
                raise InvalidConfiguration(
                    f"{path}: {section}.{key}: cannot parse {raw!r} as {typ.__name__}")

    proto, task, att = values["protocol"], values["task"], values["attack"]
    seed = int(os.environ.get("FORTA_SEED", proto["seed"]))

    rules = tuple(r.strip() for r in proto["rules"].split(",") if r.strip())
    for rule in rules:
        if rule not in RULES:
            raise InvalidConfiguration(f"protocol.rules: unknown rule {rule!r}")
    if not rules:
        raise InvalidConfiguration("protocol.rules: empty")

    if att["kind"] not in KINDS:
        raise InvalidConfiguration(f"attack.kind: unknown kind {att['kind']!r}")
    byz = () if att["kind"] == "none" else _parse_user_list(
        "attack.byzantine", att["byzantine"], proto["byzantine"])
    coll = _parse_user_list("attack.collusion", att["collusion"], 0) \
        if att["collusion"] not in ("auto", "") else ()
    spec = AttackSpec(kind=att["kind"], magnitude=att["magnitude"],
                      byzantine_set=byz, collusion_set=coll,
                      rng_seed=seed, mimic_margin=att["mimic_margin"])

    if task["kind"] not in ("blobs", "csv"):
        raise InvalidConfiguration(f"task.kind: expected 'blobs' or 'csv', got {task['kind']!r}")
    if task["kind"] == "csv" and not task["csv_path"]:
        raise InvalidConfiguration("task.csv_path: required when task.kind = csv")

    try:
        training = TrainingConfig(
            n_users=proto["n_users"], collusion=proto["collusion"],
            byzantine_bound=proto["byzantine"], select_m=proto["select_m"],
            rounds=proto["rounds"], learning_rate=proto["learning_rate"],
            batch_size=proto["batch_size"], weight_decay=proto["weight_decay"],
            rule=rules[0],
            aggregation=proto["aggregation"],
            features=task["features"], classes=task["classes"],
            cluster_spread=task["cluster_spread"], center_scale=task["center_scale"],
            samples_per_user=task["samples_per_user"], test_samples=task["test_samples"],
            csv_path=task["csv_path"] or None,
            privacy_sigma=values["sharing"]["privacy_sigma"],
            injected_precision_sigma=values["sharing"]["injected_precision_sigma"],
            rank_tolerance=values["codec"]["rank_tolerance"],
            noise_floor=values["codec"]["noise_floor"],
            evidence_floor=values["codec"]["evidence_floor"],
            temperature=proto["temperature"], hint_floor=proto["hint_floor"],
            attack=spec, local_epochs=proto["local_epochs"], seed=seed)
    except InvalidConfiguration as exc:
        raise InvalidConfiguration(f"{path}: [protocol] {exc}")

    return RunConfig(training=training, rules=rules, theory=values["theory"],
                     outdir=values["output"]["directory"],
                     plots=values["output"]["plots"])


def echo_config(run: RunConfig, path) -> None:
    """Persist the fully resolved configuration alongside the outputs."""
    cfg = run.training
    parser = configparser.ConfigParser(interpolation=None)
    parser["protocol"] = {
        "n_users": cfg.n_users, "collusion": cfg.collusion,
        "byzantine": cfg.byzantine_bound, "select_m": cfg.select_m,
        "rounds": cfg.rounds, "learning_rate": repr(cfg.learning_rate),
        "batch_size": cfg.batch_size, "weight_decay": repr(cfg.weight_decay),
        "aggregation": cfg.aggregation,
        "rules": ",".join(run.rules), "seed": cfg.seed,
        "temperature": repr(cfg.temperature), "hint_floor": repr(cfg.hint_floor),
        "local_epochs": cfg.local_epochs,
    }
    parser["codec"] = {"rank_tolerance": repr(cfg.rank_tolerance),
                       "noise_floor": repr(cfg.noise_floor),
                       "evidence_floor": repr(cfg.evidence_floor)}
    parser["sharing"] = {"privacy_sigma": repr(cfg.privacy_sigma),
                         "injected_precision_sigma": repr(cfg.injected_precision_sigma)}
    parser["task"] = {"kind": "csv" if cfg.csv_path else "blobs",
                      "features": cfg.features, "classes": cfg.classes,
                      "cluster_spread": repr(cfg.cluster_spread),
                      "center_scale": repr(cfg.center_scale),
                      "samples_per_user": cfg.samples_per_user,
                      "test_samples": cfg.test_samples,
                      "csv_path": cfg.csv_path or ""}
    parser["attack"] = {"kind": cfg.attack.kind,
                        "magnitude": repr(cfg.attack.magnitude),
                        "byzantine": ",".join(map(str, cfg.attack.byzantine_set)),
                        "collusion": ",".join(map(str, cfg.attack.collusion_set)),
                        "mimic_margin": repr(cfg.attack.mimic_margin)}
    parser["theory"] = {k: repr(v) if isinstance(v, float) else str(v)
                        for k, v in run.theory.items()}
    parser["output"] = {"directory": run.outdir, "plots": str(run.plots).lower()}
    with open(path, "w") as fh:
        parser.write(fh)
