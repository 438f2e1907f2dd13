"""Command-line front end.

Every subcommand reads its inputs from flags or from a JSON ``--config``
(flags win), writes its outputs into ``--out`` and finishes with a
``manifest.json`` describing the run. Exit status: 0 success, 1 a check
exceeded its tolerance, 2 bad input.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, RFockError
from .formfactor import Mollifier
from .io import (experiment_config_from_json, family_from_json, hoop_from_json, load_json,
                 measure_to_json, testfield_from_json, write_json, write_matrix_csv,
                 write_samples_csv)
from .kernels import (covariance_matrix, momentum_oracle_covariance,
                      shift_vector)
from .lab import (classification_experiment, classify_samples, ergodic_average,
                  euclidean_invariance_report, hellinger_decay, translated_measure)
from .loops import EuclideanTransform
from .measures import (CylindricalMeasure, char_functional, pushforward_translate, rn_density,
                       sample)
from .representations import generator_commutator_check, weyl_check

log = logging.getLogger("rfock")

SUBCOMMANDS = ("covariance", "cf", "sample", "translate", "rn-check", "hellinger", "ergodic",
               "classify", "weyl-check", "generator-check", "invariance")


class Run:
    """Resolved options plus bookkeeping for one invocation."""

    def __init__(self, args):
        self.args = args
        self.config = load_json(args.config) if args.config else {}
        if not isinstance(self.config, dict):
            raise ConfigError("config", "top level must be a JSON object")
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.checks: dict[str, dict] = {}
        self.conv = Mollifier.parse(self.get("mollifier", "paper"))

    def get(self, name, default=None):
        val = getattr(self.args, name.replace("-", "_"), None)
        if val is not None:
            return val
        return self.config.get(name, default)

    def need(self, name):
        val = self.get(name)
        if val is None:
            raise ConfigError(name, "required (flag or config key)")
        return val

    def number(self, name, default=None, kind=float):
        val = self.get(name, default)
        if val is None:
            raise ConfigError(name, "required (flag or config key)")
        try:
            return kind(val)
        except (TypeError, ValueError):
            raise ConfigError(name, f"not a number: {val!r}") from None

    def json_input(self, name):
        """A flag holding a path, or an inline object in the config."""
        val = getattr(self.args, name.replace("-", "_"), None)
        if val is not None:
            return load_json(val, name)
        return self.config.get(name)

    def family(self):
        obj = self.json_input("family")
        if obj is None:
            obj = self.json_input("hoop")
        if obj is None:
            raise ConfigError("family", "required (--family/--hoop or config key)")
        return family_from_json(obj)

    def hoop(self, name="hoop"):
        obj = self.json_input(name)
        if obj is None:
            raise ConfigError(name, "required")
        return hoop_from_json(obj, name)

    @property
    def tol(self):
        return self.number("tol", 1e-8)

    @property
    def seed(self):
        seed = self.number("seed", 0, int)
        if not 0 <= seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        return seed

    @property
    def threads(self):
        t = self.get("threads")
        return None if t is None else int(t)

    def measure(self, family):
        if self.get("haar") or self.get("r") is None:
            if self.get("r") is None and not self.get("haar"):
                raise ConfigError("r", "required unless --haar is given")
            return CylindricalMeasure.haar(family)
        r = self.number("r")
        if not r > 0:
            raise ConfigError("r", "must be positive")
        cov = covariance_matrix(family, r, self.conv, self.tol, self.threads)
        return CylindricalMeasure.gaussian(cov, self.get("mean"))

    def check(self, name, value, tolerance, ok=None):
        ok = bool(value < tolerance) if ok is None else bool(ok)
        self.checks[name] = {"value": value, "tolerance": tolerance, "pass": ok}
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.6g} (tolerance {tolerance:g})")

    def write(self, name, writer, *payload):
        path = self.out / name
        writer(path, *payload)
        self.outputs.append(str(path))

    def manifest(self, wall):
        return {
            "subcommand": self.args.command,
            "config": self.args.config,
            "seed": self.seed,
            "version": __version__,
            "tolerances": {"quadrature": self.tol},
            "mollifier": self.conv.value,
            "threads": self.threads,
            "wall_time_s": wall,
            "outputs": self.outputs,
            "checks": self.checks,
        }


# subcommands ---------------------------------------------------------------

def cmd_covariance(run: Run):
    family = run.family()
    r = run.number("r")
    cov = covariance_matrix(family, r, run.conv, run.tol, run.threads)
    run.write("covariance.csv", write_matrix_csv, cov.sigma)
    print(np.array2string(cov.sigma, precision=10))
    if run.get("oracle_check"):
        worst = 0.0
        for i in range(len(family)):
            for j in range(i, len(family)):
                val, _ = momentum_oracle_covariance(family[i], family[j], r, run.conv)
                worst = max(worst, abs(val - cov.sigma[i, j]))
        run.check("oracle_max_abs_diff", worst, 1e-5)


def cmd_cf(run: Run):
    h = run.hoop()
    if run.get("haar"):
        m = CylindricalMeasure.haar([h])
        value, s = char_functional(m, h), None
    else:
        m = run.measure([h])
        value, s = char_functional(m, h), float(m.sigma[0, 0])
    print(f"phi(T_alpha) = {value.real:.15g}{value.imag:+.15g}j")
    if s is not None:
        print(f"Sigma_alpha_alpha = {s:.15g}")
    run.write("cf.json", write_json, {"value": value, "sigma": s})


def cmd_sample(run: Run):
    m = run.measure(run.family())
    draws = run.number("draws", 1000, int)
    if draws < 1:
        raise ConfigError("draws", "must be >= 1")
    smp = sample(m, draws, run.seed, run.threads)
    run.write("samples.csv", write_samples_csv, smp)
    run.write("measure.json", write_json, measure_to_json(m))


def cmd_translate(run: Run):
    m = run.measure(run.family())
    lam = testfield_from_json(run.json_input("lambda"))
    mt = pushforward_translate(m, lam, tol=run.tol)
    if not m.is_haar:
        print("shift:", np.array2string(mt.mean - m.mean, precision=12))
    run.write("translated_measure.json", write_json, measure_to_json(mt))


def cmd_rn_check(run: Run):
    m = run.measure(run.family())
    if m.is_haar:
        raise ConfigError("r", "rn-check needs a Gaussian (r-Fock) measure")
    lam = testfield_from_json(run.json_input("lambda"))
    draws = run.number("draws", 100_000, int)
    shift = shift_vector(lam, m.family, m.cov.r, m.cov.conv, run.tol)
    theta = sample(m, draws, run.seed, run.threads).angles
    rn = rn_density(m, lam, theta, shift=shift)
    se = rn.std() / np.sqrt(draws) + 1e-300
    run.check("mean_rn_minus_1_in_stderr", abs(rn.mean() - 1.0) / se, 3.0)
    moved = pushforward_translate(m, lam, shift=shift)
    target = float(np.exp(-0.5 * m.sigma[0, 0]) * np.cos(moved.mean[0]))
    f = rn * np.cos(theta[:, 0])
    run.check("change_of_variables_in_stderr",
              abs(f.mean() - target) / (f.std() / np.sqrt(draws) + 1e-300), 3.0)
    run.write("rn_check.json", write_json, {"shift": shift, "mean_rn": rn.mean(), "stderr": se})


def _experiment(run: Run):
    obj = run.config if run.config else None
    if obj is None:
        raise ConfigError("config", "an experiment config JSON is required")
    return experiment_config_from_json(obj)


def _second_r(run: Run, cfg):
    if run.get("haar") or len(cfg.r_values) < 2:
        return None
    return cfg.r_values[1]


def cmd_hellinger(run: Run):
    cfg = _experiment(run)
    r, rp = cfg.r_values[0], _second_r(run, cfg)
    table = hellinger_decay(cfg, r, rp)
    run.write("decay.csv", table.to_csv)
    n_star, hit = table.predicted_crossing(), table.first_below(0.01)
    print(f"{table.label}: A(1) = {table.rows[0][1]:.6f}, predicted n* = {n_star}, "
          f"observed = {hit}")
    if hit is not None:
        run.check("crossing_offset", abs(hit - n_star), 2, ok=abs(hit - n_star) <= 2)
    elif n_star <= cfg.family_size_max:
        run.check("crossing_offset", float("inf"), 2)
    run.write("decay.json", write_json, {
        "label": table.label, "predicted_n_star": n_star, "observed": hit,
        "seed": cfg.seed, "tol": cfg.tol, "version": __version__})


def cmd_ergodic(run: Run):
    cfg = _experiment(run)
    n = cfg.family_size_max
    rows = []
    haar = CylindricalMeasure.haar([cfg.base_hoop])
    hm, hs = ergodic_average(haar, cfg.base_hoop, n, cfg.separation, cfg.draws, cfg.seed,
                             cfg.direction)
    rows.append(("haar", hm, hs, 0.0))
    run.check("haar_abs_mean", abs(hm), 0.05)
    for r in cfg.r_values:
        base = translated_measure(cfg.base_hoop, 1, cfg.separation, r, cfg.conv, cfg.tol)
        mean, spread = ergodic_average(base, cfg.base_hoop, n, cfg.separation, cfg.draws,
                                       cfg.seed, cfg.direction, cfg.tol)
        expected = float(np.exp(-0.5 * base.sigma[0, 0]))
        rows.append((f"r={r}", mean, spread, expected))
        run.check(f"r={r}_mean_in_spreads", abs(mean - expected) / spread, 3.0)

    def write(path):
        with open(path, "w") as fh:
            fh.write("measure,mean_re,mean_im,spread,expected\n")
            for name, mean, spread, exp in rows:
                fh.write(f"{name},{mean.real!r},{mean.imag!r},{spread!r},{exp!r}\n")

    run.write("ergodic.csv", write)


def cmd_classify(run: Run):
    cfg = _experiment(run)
    n = cfg.family_size_max
    ra, rb = cfg.r_values[0], _second_r(run, cfg)
    ma = translated_measure(cfg.base_hoop, n, cfg.separation, ra, cfg.conv, cfg.tol, cfg.direction)
    mb = translated_measure(cfg.base_hoop, n, cfg.separation, rb, cfg.conv, cfg.tol, cfg.direction)
    err, bound = classification_experiment(ma, mb, cfg.draws, cfg.seed)
    run.check("error_rate", err, 0.01)
    run.check("error_below_hellinger_bound", err, bound, ok=err <= bound)
    smp = sample(ma, cfg.draws, cfg.seed)
    res = classify_samples(smp, [ma, mb], 0)

    def write(path):
        with open(path, "w") as fh:
            fh.write("draw,label,loglik_a,loglik_b\n")
            for i, (lab, ll) in enumerate(zip(res.labels, res.loglik)):
                fh.write(f"{i},{lab},{ll[0]!r},{ll[1]!r}\n")

    run.write("classification.csv", write)
    run.write("classification.json", write_json, {
        "error_rate": err, "hellinger_bound": bound, "n": n, "draws": cfg.draws,
        "seed": cfg.seed, "tol": cfg.tol, "version": __version__})


def _operator_inputs(run: Run):
    family = run.family()
    m = run.measure(family)
    alpha = run.hoop("alpha") if run.json_input("alpha") is not None else family[0]
    lam = testfield_from_json(run.json_input("lambda"))
    return m, alpha, lam


def cmd_weyl_check(run: Run):
    m, alpha, lam = _operator_inputs(run)
    d = weyl_check(alpha, lam, m, tol=min(run.tol, 1e-12), conv=run.conv)
    run.check("weyl_max_discrepancy", d, 1e-8, ok=d < 1e-8)
    run.write("weyl_check.json", write_json, run.checks)


def cmd_generator_check(run: Run):
    m, alpha, lam = _operator_inputs(run)
    h = run.number("h_step", 1e-3)
    d = generator_commutator_check(alpha, lam, m, h, tol=min(run.tol, 1e-12), conv=run.conv)
    run.check("generator_max_discrepancy", d, 1e-5, ok=d < 1e-5)
    run.write("generator_check.json", write_json, run.checks)


def cmd_invariance(run: Run):
    h = run.hoop()
    r = run.number("r")
    specs = run.config.get("transforms")
    if specs:
        transforms = [EuclideanTransform(t.get("rotation", np.eye(3)), t.get("translation", [0, 0, 0]))
                      for t in specs]
    else:
        rng = np.random.default_rng(run.seed)
        transforms = [EuclideanTransform.random(rng, 3.0)
                      for _ in range(run.number("transforms", 20, int))]
    d = euclidean_invariance_report(h, r, transforms, run.conv, min(run.tol, 1e-11))
    run.check("euclidean_max_change", d, 1e-8)
    run.write("invariance.json", write_json, run.checks)


COMMANDS = {
    "covariance": cmd_covariance, "cf": cmd_cf, "sample": cmd_sample,
    "translate": cmd_translate, "rn-check": cmd_rn_check, "hellinger": cmd_hellinger,
    "ergodic": cmd_ergodic, "classify": cmd_classify, "weyl-check": cmd_weyl_check,
    "generator-check": cmd_generator_check, "invariance": cmd_invariance,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default="rfock-out", help="output directory")
    common.add_argument("--tol", type=float, help="quadrature tolerance (default 1e-8)")
    common.add_argument("--mollifier", choices=["paper", "unit"], help="default paper")
    common.add_argument("--seed", type=int, help="RNG seed (default 0)")
    common.add_argument("--threads", type=int, help="worker threads (default all)")
    common.add_argument("--family", help="family JSON")
    common.add_argument("--hoop", help="hoop JSON")
    common.add_argument("--r", type=float, help="smearing scale")
    common.add_argument("--haar", action="store_true", default=None, help="use the Haar measure")
    common.add_argument("--lambda", dest="lambda_", metavar="LAMBDA", help="test field JSON")
    common.add_argument("--alpha", help="hoop JSON for the holonomy operator")
    common.add_argument("--draws", type=int)
    common.add_argument("--h-step", dest="h_step", type=float)
    common.add_argument("--transforms", type=int)
    common.add_argument("--oracle-check", dest="oracle_check", action="store_true", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="rfock", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rfock {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    # "lambda" is a keyword; expose it under its config name
    args.__dict__["lambda"] = args.__dict__.pop("lambda_")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        r = Run(args)
        COMMANDS[args.command](r)
    except ConfigError as exc:
        print(f"rfock: input error in {exc}", file=sys.stderr)
        return 2
    except RFockError as exc:
        print(f"rfock: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    write_json(r.out / "manifest.json", r.manifest(time.perf_counter() - t0))
    return 0 if all(c["pass"] for c in r.checks.values()) else 1


def main():
    sys.exit(run())
