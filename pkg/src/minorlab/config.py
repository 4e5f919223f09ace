"""Typed INI experiment configs.

A config has three sections: [experiment] (task + output directory),
[model] (family + parameters) and [run] (task-specific settings).  Every
key is declared in the schema below with a type; unknown sections or
keys, missing required keys, and out-of-range values are rejected before
any computation starts.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional

TASKS = (
    "check", "hormander", "simulate", "density", "timeavg",
    "minorize", "mixing", "steinhaus", "lev", "smallset", "polytope",
)


class ConfigError(ValueError):
    pass


def _frac(text: str) -> Fraction:
    return Fraction(text.strip())


def _float(text: str) -> float:
    return float(Fraction(text.strip())) if "/" in text else float(text)


def _int(text: str) -> int:
    return int(text.strip())


def _str(text: str) -> str:
    return text.strip()


def _float_list(text: str) -> list[float]:
    return [_float(v) for v in text.split(",") if v.strip()]


def _frac_list(text: str) -> list[Fraction]:
    return [_frac(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [_int(v) for v in text.split(",") if v.strip()]


def _pairs(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.split(","):
        if not chunk.strip():
            continue
        lo, hi = chunk.split(":")
        out.append((_float(lo), _float(hi)))
    return out


def _interval_list(text: str) -> list[tuple[Fraction, Fraction]]:
    out = []
    for chunk in text.split(","):
        if not chunk.strip():
            continue
        lo, hi = chunk.split(":")
        out.append((_frac(lo), _frac(hi)))
    return out


# section -> key -> (parser, required-for-tasks or None, description)
SCHEMA: dict[str, dict[str, tuple]] = {
    "experiment": {
        "task": (_str, "*", f"one of {', '.join(TASKS)}"),
        "output": (_str, "*", "output directory"),
        "criterion": (_str, None, "acceptance criterion id for reports"),
    },
    "model": {
        "family": (_str, "*", "langevin | langevin_aniso | oscillator_chain | lorenz96 | fluid_generic"),
        "n": (_int, None, "degrees of freedom (Langevin-type families)"),
        "d": (_int, None, "state dimension (lorenz96 / fluid_generic)"),
        "potential": (_str, None, "polynomial potential in x1..xn"),
        "temps": (_frac_list, None, "per-coordinate temperatures"),
        "k": (_int, None, "pinning exponent (oscillator chain)"),
        "j": (_int, None, "interaction exponent (oscillator chain)"),
        "gamma1": (_frac, None, "left-end friction"),
        "gamman": (_frac, None, "right-end friction"),
        "t1": (_frac, None, "left-end temperature"),
        "tn": (_frac, None, "right-end temperature"),
        "lambdas": (_frac_list, None, "damping rates"),
        "sigmas": (_frac_list, None, "noise amplitudes (lorenz96)"),
        "b_field": (_str, None, "conservative field DSL (fluid_generic)"),
        "eta": (_frac, None, "override the energy-inequality constant"),
        "dstar": (_frac, None, "override the drift ceiling constant"),
    },
    "run": {
        "eps": (_float, None, "single small parameter in (0, 1)"),
        "eps_list": (_float_list, None, "sweep values in (0, 1)"),
        "t0": (_float, None, "rescaled observation time"),
        "t_end": (_float, None, "rescaled horizon (simulate)"),
        "r_level": (_float, None, "sublevel-set level R"),
        "alpha": (_float, None, "averaging rate (default inf div Z)"),
        "grid_box": (_pairs, None, "per-axis lo:hi, comma separated"),
        "grid_cells": (_int_list, None, "cells per axis"),
        "n_traj": (_int, None, "ensemble size"),
        "seed": (_int, None, "master seed"),
        "dt_phys": (_float, None, "physical step size"),
        "dt_scale": (_float, None, "dt_phys = dt_scale * eps"),
        "x0": (_float_list, None, "start state"),
        "lattice_scale": (_float, None, "start lattice spans H < scale*R"),
        "ratio_bound": (_float, None, "sweep pass ratio bound (default 3)"),
        "max_depth": (_int, None, "bracket depth"),
        "eps_grid": (_frac_list, None, "certificate eps grid"),
        "threshold": (_frac, None, "certificate singular-value floor"),
        "n_points": (_int, None, "audit sample count"),
        "n_samples": (_int, None, "certificate state samples"),
        "tv_threshold": (_float, None, "mixing threshold (default 1/4)"),
        "t_grid_max": (_float, None, "mixing time grid upper end"),
        "intervals": (_interval_list, None, "interval union lo:hi, comma separated"),
        "random_sets": (_int, None, "number of seeded random interval sets"),
        "l_bound": (_int, None, "interval sets live in [0, L]"),
        "min_measure": (_frac, None, "measure floor eta"),
        "values": (_int_list, None, "integer set (lev)"),
        "n_fold": (_int, None, "fold count (lev)"),
        "kernel_csv": (_str, None, "kernel file t,i,j,p"),
        "times": (_int_list, None, "kernel observation times"),
        "levels": (_frac_list, None, "per-state energy levels"),
        "c_r": (_frac, None, "petite lower constant"),
        "c_upper": (_frac, None, "petite upper constant"),
        "n_vertices": (_int, None, "polytope vertex count"),
        "radius": (_float, None, "polytope sphere radius"),
        "direction": (_float_list, None, "transversality direction"),
    },
}


@dataclass
class ExperimentConfig:
    task: str
    output: str
    criterion: Optional[str]
    model: dict[str, Any]
    run: dict[str, Any]

    def model_params(self) -> dict:
        p = dict(self.model)
        p.pop("family", None)
        p.pop("eta", None)
        p.pop("dstar", None)
        # map config key names to builder names
        if "t1" in p:
            p["T1"] = p.pop("t1")
        if "tn" in p:
            p["Tn"] = p.pop("tn")
        if "b_field" in p:
            p["B"] = p.pop("b_field")
        return p

    def overrides(self) -> dict:
        """Constant overrides applied on top of the built model (used to
        audit deliberately broken configurations)."""
        out = {}
        for key in ("eta", "dstar"):
            if key in self.model:
                out[key] = self.model[key]
        return out


def load_config(path: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = cp.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    parsed: dict[str, dict[str, Any]] = {"experiment": {}, "model": {}, "run": {}}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp[section].items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            parser = SCHEMA[section][key][0]
            try:
                parsed[section][key] = parser(raw)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc
    exp = parsed["experiment"]
    for key, (p, req, _) in SCHEMA["experiment"].items():
        if req == "*" and key not in exp:
            raise ConfigError(f"missing required key experiment.{key}")
    if exp["task"] not in TASKS:
        raise ConfigError(f"unknown task {exp['task']!r}")
    if exp["task"] not in ("steinhaus", "lev", "smallset", "polytope"):
        if "family" not in parsed["model"]:
            raise ConfigError("missing required key model.family")
    run = parsed["run"]
    for key in ("eps",):
        if key in run and not (0.0 < run[key] < 1.0):
            raise ConfigError(f"run.{key} must lie in (0, 1)")
    if "eps_list" in run and any(not (0.0 < e < 1.0) for e in run["eps_list"]):
        raise ConfigError("run.eps_list entries must lie in (0, 1)")
    return ExperimentConfig(
        task=exp["task"],
        output=exp["output"],
        criterion=exp.get("criterion"),
        model=parsed["model"],
        run=run,
    )


def schema_json() -> str:
    doc = {}
    for section, keys in SCHEMA.items():
        doc[section] = {
            key: {"type": parser.__name__.lstrip("_"), "required": req == "*",
                  "help": help_}
            for key, (parser, req, help_) in keys.items()
        }
    return json.dumps(doc, indent=2)
