"""Experiment command line: build / rotate / sweep / inspect.

Exit codes: 0 success, 2 configuration error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import sys
from datetime import datetime, timezone
from pathlib import Path


from .channel import (
    detection_inner_products,
    measure_nmse,
    measure_ser,
    nmse_lower_bound,
    snr_db_to_sigma_v2,
)
from .channel import beta_from_sigma
from .codebook import Codebook
from .config import ExperimentConfig, load_config
from .constellations import (
    CubeSplitParams,
    ExpMapParams,
    build_cubesplit,
    build_expmap,
    build_manopt,
    cubesplit_bits_for_rate,
    expmap_orders_for_bits,
    tune_expmap_scale,
)
from .errors import ConfigError, DcrsError, OptimizerAbort
from .linalg import min_chordal_distance
from .optim import OptimizerOptions
from .rates import (
    coherent_rate_csi_error,
    grassmann_rate,
    qam_constellation,
    total_slot_rate,
)
from .rng import substream
from .rotation import optimize_unitary_rotations, union_bound_ser

SWEEP_KINDS = ("nmse", "ser", "rate-g", "rate-e", "total", "iprod")

_SWEEP_COLUMNS = {
    "nmse": ["snr_db", "nmse_db", "stderr_db", "trials", "estimator",
             "codebook_digest"],
    "ser": ["snr_db", "ser", "stderr", "union_bound", "trials",
            "codebook_digest"],
    "rate-g": ["snr_db", "rate_kind", "mean", "stderr", "trials",
               "codebook_digest", "qam_order", "beta"],
    "rate-e": ["snr_db", "rate_kind", "mean", "stderr", "trials",
               "codebook_digest", "qam_order", "beta"],
    "total": ["snr_db", "rate_kind", "mean", "stderr", "trials",
              "codebook_digest", "qam_order", "beta"],
    "iprod": ["snr_db", "inner_product"],
}


# ---------------------------------------------------------------------------
# codebook construction from config


def build_codebook_from_config(cfg: ExperimentConfig) -> Codebook:
    spec = cfg.codebook
    method = spec.get("method")
    if method == "exp-map":
        if "orders" in spec:
            orders = tuple(int(o) for o in spec["orders"])
        else:
            orders = expmap_orders_for_bits(cfg.t, cfg.m, int(spec["bits"]))
        params = ExpMapParams(
            t=cfg.t, m=cfg.m, per_symbol_orders=orders,
            alphabet=spec.get("alphabet", "QAM"),
            scale=float(spec.get("scale", 1.0)),
        )
        if "scale_grid" in spec:
            scale = tune_expmap_scale(
                params, [float(s) for s in spec["scale_grid"]]
            )
            params = ExpMapParams(
                t=cfg.t, m=cfg.m, per_symbol_orders=orders,
                alphabet=params.alphabet, scale=scale,
            )
        return build_expmap(params)
    if method == "cube-split":
        if "bits_per_coord" in spec:
            bits = tuple(int(b) for b in spec["bits_per_coord"])
        else:
            bits = cubesplit_bits_for_rate(cfg.t, int(spec["bits"]) / cfg.t)
        return build_cubesplit(CubeSplitParams(t=cfg.t, bits_per_coord=bits))
    if method == "manopt":
        size = 2 ** int(spec["bits"])
        opts = None
        if "max_iter" in spec:
            opts = OptimizerOptions(max_iter=int(spec["max_iter"]))
        rng = substream(cfg.master_seed, 0x6D0)
        return build_manopt(size, cfg.t, cfg.m, rng, opts=opts,
                            seed_label=cfg.master_seed)
    raise ConfigError(f"unknown codebook method {method!r}")


def load_or_build_codebook(cfg: ExperimentConfig) -> Codebook:
    path = cfg.codebook.get("path")
    if path and Path(path).exists():
        return Codebook.load(path)
    if cfg.codebook.get("method"):
        cb = build_codebook_from_config(cfg)
        if cfg.codebook.get("rotate"):
            cb, _ = optimize_unitary_rotations(cb)
        return cb
    raise ConfigError("config names neither an existing codebook file "
                      "nor a build method")


def codebook_report(cb: Codebook, n_rx: int = 1) -> str:
    lines = [
        f"method          {cb.method}",
        f"shape           T={cb.t} M={cb.m}",
        f"size            {cb.size} ({cb.bits} bits)",
        f"rate            {cb.rate:.4f} bit/sym",
        f"min chordal d.  {cb.mcd():.6f}",
        f"digest          {cb.digest()}",
    ]
    for snr in (10.0, 15.0, 20.0):
        ser = union_bound_ser(cb, snr_db_to_sigma_v2(snr), n_rx)
        lines.append(f"SER bound @{snr:>4.0f} dB  {ser:.6e}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# sweep evaluation (one SNR point -> list of CSV rows)


def _eval_sigma_e2(cfg: ExperimentConfig, codebook, snr: float) -> float:
    if cfg.beta_source == "pcsi":
        return 0.0
    if cfg.beta_source == "bound" or cfg.estimator == "training":
        return nmse_lower_bound(snr_db_to_sigma_v2(snr), cfg.m, cfg.t)
    rep = measure_nmse(
        [snr], trials=cfg.nmse_trials or cfg.trials,
        master_seed=cfg.master_seed, codebook=codebook, n_rx=cfg.n_rx,
        t=cfg.t, m=cfg.m, estimator="dcrs", mode=cfg.est_mode,
    )
    return rep.sigma_e2[0]


def sweep_point(kind: str, cfg: ExperimentConfig, codebook, snr: float):
    """All CSV rows for one SNR point of a sweep; pure in (args, seed)."""
    sigma_v2 = snr_db_to_sigma_v2(snr)
    if kind == "nmse":
        rep = measure_nmse(
            [snr], trials=cfg.trials, master_seed=cfg.master_seed,
            codebook=codebook if cfg.estimator == "dcrs" else None,
            n_rx=cfg.n_rx, t=cfg.t, m=cfg.m,
            estimator=cfg.estimator, mode=cfg.est_mode,
        )
        return [[snr, rep.nmse_db[0], rep.stderr_db[0], rep.trials,
                 rep.estimator, rep.codebook_digest]]
    if kind == "ser":
        ser, stderr = measure_ser(snr, cfg.trials, cfg.master_seed,
                                  codebook, cfg.n_rx)
        bound = union_bound_ser(codebook, sigma_v2, cfg.n_rx)
        return [[snr, ser, stderr, bound, cfg.trials, codebook.digest()]]
    if kind == "iprod":
        vals = detection_inner_products(snr, cfg.trials, cfg.master_seed,
                                        codebook, cfg.n_rx)
        return [[snr, v] for v in vals]

    qam = qam_constellation(cfg.qam_order)
    rows = []
    rg = None
    if kind in ("rate-g", "total") and cfg.estimator == "dcrs":
        rg = grassmann_rate(codebook, cfg.n_rx, sigma_v2, cfg.trials,
                            cfg.master_seed, cfg.stderr_target)
        rows.append([snr, "rg", rg.mean, rg.stderr, rg.trials,
                     codebook.digest() if codebook else "", "", ""])
    if kind == "rate-g":
        return rows
    sigma_e2 = _eval_sigma_e2(cfg, codebook, snr)
    beta = beta_from_sigma(min(sigma_e2, 2.0))
    re = coherent_rate_csi_error(qam, cfg.m, cfg.n_rx, sigma_v2, beta,
                                 cfg.trials, cfg.master_seed,
                                 cfg.stderr_target)
    rows.append([snr, "re_err", re.mean, re.stderr, re.trials, "",
                 cfg.qam_order, beta])
    if kind == "total":
        tot = total_slot_rate(rg, re, cfg.n_rs_slots, cfg.n_data_slots)
        rows.append([snr, "total", tot.mean, tot.stderr, tot.trials, "",
                     cfg.qam_order, beta])
    return rows


# ---------------------------------------------------------------------------
# CSV dataset with metadata header and per-point resume


def _render_csv(kind, cfg, rows_by_snr, timestamp) -> str:
    buf = io.StringIO()
    buf.write(f"# config_digest={cfg.digest()}\n")
    buf.write(f"# scenario={cfg.scenario}\n")
    buf.write(f"# kind={kind}\n")
    buf.write(f"# seed={cfg.master_seed}\n")
    buf.write(f"# created={timestamp}\n")
    w = csv.writer(buf)
    w.writerow(_SWEEP_COLUMNS[kind])
    for snr in cfg.snr_grid:
        for row in rows_by_snr[snr]:
            w.writerow(row)
    return buf.getvalue()


def _read_existing(path: Path, kind: str, cfg) -> dict[float, list[list]]:
    """Rows of a partial sweep keyed by SNR; rejects foreign config digests."""
    done: dict[float, list[list]] = {}
    with open(path) as f:
        header_digest = None
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key == "config_digest":
                    header_digest = val
                continue
            if header_digest != cfg.digest():
                raise ConfigError(
                    f"{path} was produced by a different config "
                    f"(digest {header_digest}); refusing to mix outputs"
                )
            reader = csv.reader([line] + f.readlines())
            cols = next(reader)
            if cols != _SWEEP_COLUMNS[kind]:
                raise ConfigError(f"{path} holds a different sweep kind")
            for row in reader:
                if row:
                    done.setdefault(float(row[0]), []).append(row)
            break
    return done


def cmd_sweep(kind: str, cfg: ExperimentConfig, out: Path, workers: int) -> None:
    needs_codebook = (
        kind in ("ser", "iprod")
        or (kind in ("rate-g", "total") and cfg.estimator == "dcrs")
        or (kind in ("nmse", "rate-e") and cfg.estimator == "dcrs")
    )
    codebook = load_or_build_codebook(cfg) if needs_codebook else None
    rows_by_snr: dict[float, list[list]] = {}
    if out.exists():
        rows_by_snr.update(_read_existing(out, kind, cfg))
    todo = [s for s in cfg.snr_grid if s not in rows_by_snr]
    if workers > 1 and len(todo) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            futs = {ex.submit(sweep_point, kind, cfg, codebook, s): s
                    for s in todo}
            for fut in concurrent.futures.as_completed(futs):
                rows_by_snr[futs[fut]] = fut.result()
    else:
        for s in todo:
            rows_by_snr[s] = sweep_point(kind, cfg, codebook, s)
    timestamp = datetime.now(timezone.utc).isoformat()
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(_render_csv(kind, cfg, rows_by_snr, timestamp))
    print(f"wrote {out} ({len(cfg.snr_grid)} SNR points, "
          f"{len(todo)} computed, {len(cfg.snr_grid) - len(todo)} resumed)")


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(cfg: ExperimentConfig, out: Path) -> None:
    cb = build_codebook_from_config(cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    cb.save(out)
    print(f"wrote {out}")
    print(codebook_report(cb, cfg.n_rx))


def cmd_rotate(cfg: ExperimentConfig, out: Path) -> None:
    path = cfg.codebook.get("path")
    if not path or not Path(path).exists():
        raise ConfigError("rotate needs codebook.path pointing at an "
                          "existing codebook file")
    cb = Codebook.load(path)
    rotated, info = optimize_unitary_rotations(cb)
    out.parent.mkdir(parents=True, exist_ok=True)
    rotated.save(out)
    d_mcd = abs(min_chordal_distance(rotated.points)
                - min_chordal_distance(cb.points))
    print(f"wrote {out}")
    print(f"objective before {info['objective_before']:.6f} "
          f"after {info['objective_after']:.6f}")
    print(f"delta MCD        {d_mcd:.3e}")
    if d_mcd >= 1e-10:
        raise OptimizerAbort("rotation changed the minimum chordal distance")


def cmd_inspect(path: Path) -> None:
    cb = Codebook.load(path)
    print(codebook_report(cb))


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcrs",
                                description="Grassmann DC-RS experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config's master seed")
        sp.add_argument("--trials", type=int, default=None)
        sp.add_argument("--stderr-target", type=float, default=None)

    b = sub.add_parser("build", help="construct a codebook file")
    common(b)
    b.add_argument("--out", required=True)

    r = sub.add_parser("rotate", help="NMSE-minimizing unitary rotation")
    common(r)
    r.add_argument("--out", required=True)

    s = sub.add_parser("sweep", help="run an SNR sweep to CSV")
    s.add_argument("kind", choices=SWEEP_KINDS)
    common(s)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)

    i = sub.add_parser("inspect", help="print a codebook report")
    i.add_argument("path")
    return p


def _load_with_overrides(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.stderr_target is not None:
        overrides["stderr_target"] = args.stderr_target
    return cfg.replace(**overrides) if overrides else cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "inspect":
            cmd_inspect(Path(args.path))
            return 0
        cfg = _load_with_overrides(args)
        if args.command == "build":
            cmd_build(cfg, Path(args.out))
        elif args.command == "rotate":
            cmd_rotate(cfg, Path(args.out))
        elif args.command == "sweep":
            cmd_sweep(args.kind, cfg, Path(args.out), args.workers)
        return 0
    except (ConfigError, OSError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OptimizerAbort, FloatingPointError, DcrsError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
