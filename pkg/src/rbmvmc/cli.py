"""Experiment orchestrator.

Subcommands:

  optimize   train an RBM ground state and write trajectory/checkpoints/spectra
  spectrum   Fisher-matrix spectrum report for a saved checkpoint
  gibbs      coherent-Gibbs-state checkpoints and rank/trace versus beta
  exact      exact ground-state energy reference

A run directory contains `manifest.json` (the fully resolved configuration,
its hash, seed and package version), `trajectory.jsonl` (one record per
epoch: epoch, energy re/im, variance, rescaled energy, acceptance rates,
wall time), `checkpoints/epoch-XXXX.json` and `spectra/epoch-XXXX.tsv` plus
summary JSON. Numeric table output uses 17 significant digits so doubles
round-trip losslessly.

Configuration may come from a JSON file (--config) whose keys mirror the
long flag names; explicit flags override file values. All randomness flows
from the single --seed value.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import VmcError
from .estimator import fisher_exact, fisher_from_batch
from .exact import exact_ground
from .gibbsmap import ferromagnet, gibbs_to_rbm
from .hamiltonian import transverse_field_ising, xxz
from .lattice import build_chain, build_square
from .optimizer import RunSchedule, run_optimization
from .rbm import init_random, load_checkpoint, save_checkpoint
from .sampler import SampleBatch, make_chains, metropolis_flip_sweep, wolff_sweep
from .spectral import spectrum, summary_dict, write_spectrum_table

_ETA_DEFAULTS = {"tfi1d": 0.01, "tfi2d": 0.002, "xxz": 0.02}


class ConfigError(Exception):
    """Invalid or incomplete run configuration; exits with status 2."""


def _fail(message: str) -> "ConfigError":
    return ConfigError(message)


def _merged_config(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags (flags are None when absent)."""
    cfg = dict(defaults)
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise _fail(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise _fail(f"config file is not valid JSON: {exc}")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise _fail(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _require(cfg: dict, key: str):
    if cfg.get(key) is None:
        raise _fail(f"missing required field: {key}")
    return cfg[key]


def _build_model(cfg: dict):
    model = _require(cfg, "model")
    periodic = cfg["boundary"] == "periodic"
    if model == "tfi1d":
        lat = build_chain(int(_require(cfg, "n")), periodic=periodic)
        return transverse_field_ising(lat, float(_require(cfg, "h")))
    if model == "tfi2d":
        lat = build_square(int(_require(cfg, "side")), periodic=periodic)
        return transverse_field_ising(lat, float(_require(cfg, "h")))
    if model == "xxz":
        lat = build_chain(int(_require(cfg, "n")), periodic=periodic)
        return xxz(lat, float(_require(cfg, "delta")))
    raise _fail(f"unknown model {model!r} (expected tfi1d, tfi2d or xxz)")


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(canon).hexdigest()


def _write_manifest(out: Path, cfg: dict) -> None:
    doc = {"config": cfg, "config_hash": _config_hash(cfg),
           "seed": cfg.get("seed"), "version": __version__}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")


def _g17(x: float) -> str:
    return format(float(x), ".17g")


# -- optimize -----------------------------------------------------------------

_OPTIMIZE_DEFAULTS = {
    "model": None, "n": None, "side": None, "h": None, "delta": None,
    "boundary": "periodic", "alpha": 3, "hidden": None, "sigma": 1e-2,
    "method": "sr", "backend": "exact", "eta": None, "eps": 1e-3,
    "epochs": 1000, "rms_beta": 0.9, "rms_eps": 1e-8,
    "samples": 1000, "chains": 16, "thinning": 1, "burn_in": None,
    "update": None, "sector": None, "spectrum_every": 5,
    "seed": 0, "out": None, "reference": True,
}


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = _merged_config(args, _OPTIMIZE_DEFAULTS)
    ham = _build_model(cfg)
    n = ham.lattice.n_sites
    m = int(cfg["hidden"]) if cfg["hidden"] is not None else int(cfg["alpha"]) * n
    eta = cfg["eta"] if cfg["eta"] is not None else _ETA_DEFAULTS[cfg["model"]]
    update = cfg["update"]
    if update is None:
        update = "swap" if cfg["model"] == "xxz" else "flip"
    sector = cfg["sector"]
    if sector is None and cfg["model"] == "xxz":
        sector = "jz-zero"
    if sector == "full":
        sector = None
    cfg.update(eta=eta, update=update, sector=sector, hidden=m)

    out = Path(cfg["out"] if cfg["out"] else f"run-{cfg['model']}-{_config_hash(cfg)[:8]}")
    out.mkdir(parents=True, exist_ok=True)
    (out / "checkpoints").mkdir(exist_ok=True)
    (out / "spectra").mkdir(exist_ok=True)
    _write_manifest(out, cfg)

    reference = None
    if cfg["reference"] and n <= 20:
        reference = exact_ground(ham, sector=sector, want_vector=False).ground_energy

    params = init_random(n, m, float(cfg["sigma"]), int(cfg["seed"]))
    schedule = RunSchedule(
        method=cfg["method"], backend=cfg["backend"], eta=float(eta),
        epsilon=float(cfg["eps"]), epochs=int(cfg["epochs"]),
        rms_beta=float(cfg["rms_beta"]), rms_eps=float(cfg["rms_eps"]),
        sector=sector if cfg["backend"] == "exact" else None,
        n_samples=int(cfg["samples"]), n_chains=int(cfg["chains"]),
        thinning=int(cfg["thinning"]),
        burn_in=None if cfg["burn_in"] is None else int(cfg["burn_in"]),
        update=update,
        chain_init="balanced" if (sector == "jz-zero" and cfg["backend"] == "mcmc")
        else "random",
        spectrum_every=int(cfg["spectrum_every"]),
        reference_energy=reference, seed=int(cfg["seed"]),
    )

    traj_path = out / "trajectory.jsonl"
    with open(traj_path, "w", encoding="utf-8") as traj:
        def on_epoch(record, current_params):
            row = {
                "epoch": record.epoch,
                "energy_re": record.energy.real,
                "energy_im": record.energy.imag,
                "energy_var": record.variance,
                "rescaled": record.rescaled,
                "acceptance": record.acceptance,
                "wall_time": record.wall_time,
            }
            traj.write(json.dumps(row) + "\n")
            if record.spectrum is not None or record.epoch == schedule.epochs:
                tag = f"epoch-{record.epoch:04d}"
                save_checkpoint(out / "checkpoints" / f"{tag}.json",
                                current_params, epoch=record.epoch,
                                seed=int(cfg["seed"]))
            if record.spectrum is not None:
                tag = f"epoch-{record.epoch:04d}"
                write_spectrum_table(record.spectrum, out / "spectra" / f"{tag}.tsv")
                (out / "spectra" / f"{tag}.json").write_text(
                    json.dumps(summary_dict(record.spectrum)) + "\n")

        records, _ = run_optimization(ham, params, schedule, on_epoch=on_epoch)

    final = records[-1]
    print(f"run directory: {out}")
    print(f"epochs: {final.epoch}  energy: {_g17(final.energy.real)}"
          + (f"  rescaled: {_g17(final.rescaled)}" if final.rescaled is not None else ""))
    return 0


# -- spectrum -----------------------------------------------------------------

_SPECTRUM_DEFAULTS = {
    "backend": "exact", "sector": None, "samples": 2000, "chains": 16,
    "thinning": 1, "burn_in": None, "seed": 0, "out": None, "relative_rank": False,
}


def cmd_spectrum(args: argparse.Namespace) -> int:
    cfg = _merged_config(args, _SPECTRUM_DEFAULTS)
    try:
        params, epoch, _ = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise _fail(f"cannot read checkpoint: {exc}")

    if cfg["backend"] == "exact":
        fisher = fisher_exact(params, sector=cfg["sector"])
    else:
        chains = make_chains(params, n_chains=int(cfg["chains"]), seed=int(cfg["seed"]))
        n = params.n_visible
        burn = int(cfg["burn_in"]) if cfg["burn_in"] is not None else 10 * n
        for sweep_idx in range(burn):
            for chain in chains:
                metropolis_flip_sweep(chain, params)
        samples = int(cfg["samples"])
        from .rbm import o_vector
        from .sampler import parallel_tempering_exchange
        o_rows = np.empty((samples, params.dim), dtype=np.complex128)
        cfgs = np.empty((samples, n), dtype=np.int8)
        for s in range(samples):
            for _ in range(int(cfg["thinning"])):
                for chain in chains:
                    metropolis_flip_sweep(chain, params)
                parallel_tempering_exchange(chains, params, pair_parity=s % 2)
            cfgs[s] = chains[-1].lookup.spins
            o_rows[s] = o_vector(chains[-1].lookup, params)
        batch = SampleBatch(configs=cfgs, o_vectors=o_rows,
                            local_energies=None, count=samples)
        fisher = fisher_from_batch(batch)

    report = spectrum(fisher, relative_rank=bool(cfg["relative_rank"]))
    out = Path(cfg["out"]) if cfg["out"] else Path(args.checkpoint).parent
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.checkpoint).stem
    write_spectrum_table(report, out / f"{stem}.spectrum.tsv")
    summary = summary_dict(report)
    (out / f"{stem}.spectrum.json").write_text(json.dumps(summary) + "\n")
    print(json.dumps({"checkpoint": str(args.checkpoint), "epoch": epoch, **summary}))
    return 0


# -- gibbs --------------------------------------------------------------------

_GIBBS_DEFAULTS = {
    "side": None, "boundary": "open", "backend": "exact",
    "samples": 2000, "thinning": 3, "burn_in": 200, "seed": 0, "out": None,
}


def cmd_gibbs(args: argparse.Namespace) -> int:
    cfg = _merged_config(args, _GIBBS_DEFAULTS)
    side = int(_require(cfg, "side"))
    lat = build_square(side, periodic=cfg["boundary"] == "periodic")
    n = lat.n_sites
    out = Path(cfg["out"] if cfg["out"] else f"gibbs-L{side}")
    out.mkdir(parents=True, exist_ok=True)
    cfg_with_betas = dict(cfg, betas=list(args.betas))
    _write_manifest(out, cfg_with_betas)

    rows = []
    rng = np.random.default_rng(int(cfg["seed"]))
    for beta in args.betas:
        model = ferromagnet(lat, float(beta))
        params = gibbs_to_rbm(model)
        tag = f"gibbs-beta-{beta:g}"
        save_checkpoint(out / f"{tag}.json", params, epoch=0, seed=int(cfg["seed"]))
        if cfg["backend"] == "exact":
            fisher = fisher_exact(params)
        elif cfg["backend"] == "wolff":
            spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
            for _ in range(int(cfg["burn_in"])):
                wolff_sweep(spins, float(beta), lat, rng)
            samples = int(cfg["samples"])
            from .exact import _chi_chunk, _o_chunk

            o_rows = np.empty((samples, params.dim), dtype=np.complex128)
            cfgs = np.empty((samples, n), dtype=np.int8)
            for s in range(samples):
                for _ in range(int(cfg["thinning"])):
                    wolff_sweep(spins, float(beta), lat, rng)
                cfgs[s] = spins
            for lo in range(0, samples, 1024):
                xf = cfgs[lo:lo + 1024].astype(np.float64)
                o_rows[lo:lo + 1024] = _o_chunk(xf, _chi_chunk(params, xf))
            batch = SampleBatch(configs=cfgs, o_vectors=o_rows,
                                local_energies=None, count=samples)
            fisher = fisher_from_batch(batch)
        else:
            raise _fail(f"unknown gibbs backend {cfg['backend']!r}")
        report = spectrum(fisher, relative_rank=cfg["backend"] == "wolff")
        write_spectrum_table(report, out / f"{tag}.spectrum.tsv")
        rows.append((float(beta), report.rank, report.trace))

    table = out / "trace_vs_beta.tsv"
    with open(table, "w", encoding="utf-8") as f:
        f.write("beta\trank\ttrace\n")
        for beta, rank, trace in rows:
            f.write(f"{_g17(beta)}\t{rank}\t{_g17(trace)}\n")
            print(f"beta={beta:g} rank={rank} trace={_g17(trace)}")
    return 0


# -- exact --------------------------------------------------------------------

_EXACT_DEFAULTS = {
    "model": None, "n": None, "side": None, "h": None, "delta": None,
    "boundary": "periodic", "sector": None, "out": None,
}


def cmd_exact(args: argparse.Namespace) -> int:
    cfg = _merged_config(args, _EXACT_DEFAULTS)
    ham = _build_model(cfg)
    sector = None if cfg["sector"] in (None, "full") else cfg["sector"]
    result = exact_ground(ham, sector=sector, want_vector=False)
    print(f"ground energy: {_g17(result.ground_energy)}")
    if cfg["out"]:
        Path(cfg["out"]).write_text(json.dumps(
            {"ground_energy": result.ground_energy, "sector": result.sector}) + "\n")
    return 0


# -- parser -------------------------------------------------------------------

def _add_common_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=["tfi1d", "tfi2d", "xxz"])
    p.add_argument("--n", type=int, help="site count for 1D models")
    p.add_argument("--side", type=int, help="linear size for 2D models")
    p.add_argument("--h", type=float, help="transverse field")
    p.add_argument("--delta", type=float, help="XXZ anisotropy")
    p.add_argument("--boundary", choices=["periodic", "open"])
    p.add_argument("--sector", choices=["full", "jz-zero"])
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--out", help="output directory or file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbmvmc",
                                     description="RBM variational Monte Carlo "
                                                 "with Fisher-matrix diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="ground-state optimization run")
    _add_common_model_flags(p_opt)
    p_opt.add_argument("--alpha", type=int, help="hidden/visible ratio (default 3)")
    p_opt.add_argument("--hidden", type=int, help="explicit hidden unit count")
    p_opt.add_argument("--sigma", type=float, help="init noise scale (default 1e-2)")
    p_opt.add_argument("--method", choices=["sr", "rmsprop", "rmsprop-classic"])
    p_opt.add_argument("--backend", choices=["exact", "mcmc"])
    p_opt.add_argument("--eta", type=float, help="learning rate (default per model)")
    p_opt.add_argument("--eps", type=float, help="SR regularization (default 1e-3)")
    p_opt.add_argument("--epochs", type=int)
    p_opt.add_argument("--rms-beta", dest="rms_beta", type=float)
    p_opt.add_argument("--rms-eps", dest="rms_eps", type=float)
    p_opt.add_argument("--samples", type=int, help="MCMC samples per epoch")
    p_opt.add_argument("--chains", type=int, help="tempering chain count (default 16)")
    p_opt.add_argument("--thinning", type=int)
    p_opt.add_argument("--burn-in", dest="burn_in", type=int)
    p_opt.add_argument("--update", choices=["flip", "swap"])
    p_opt.add_argument("--spectrum-every", dest="spectrum_every", type=int)
    p_opt.add_argument("--seed", type=int)
    p_opt.add_argument("--no-reference", dest="reference", action="store_false",
                       default=None, help="skip the exact reference energy")
    p_opt.set_defaults(func=cmd_optimize)

    p_spec = sub.add_parser("spectrum", help="Fisher spectrum of a checkpoint")
    p_spec.add_argument("checkpoint")
    p_spec.add_argument("--backend", choices=["exact", "mcmc"])
    p_spec.add_argument("--sector", choices=["full", "jz-zero"])
    p_spec.add_argument("--samples", type=int)
    p_spec.add_argument("--chains", type=int)
    p_spec.add_argument("--thinning", type=int)
    p_spec.add_argument("--burn-in", dest="burn_in", type=int)
    p_spec.add_argument("--seed", type=int)
    p_spec.add_argument("--relative-rank", dest="relative_rank",
                        action="store_true", default=None)
    p_spec.add_argument("--config", help="JSON config file")
    p_spec.add_argument("--out")
    p_spec.set_defaults(func=cmd_spectrum)

    p_gibbs = sub.add_parser("gibbs", help="coherent Gibbs states over a beta grid")
    p_gibbs.add_argument("--side", type=int)
    p_gibbs.add_argument("--boundary", choices=["periodic", "open"])
    p_gibbs.add_argument("--beta", dest="betas", type=float, nargs="+",
                         required=True, help="inverse temperatures")
    p_gibbs.add_argument("--backend", choices=["exact", "wolff"])
    p_gibbs.add_argument("--samples", type=int)
    p_gibbs.add_argument("--thinning", type=int)
    p_gibbs.add_argument("--burn-in", dest="burn_in", type=int)
    p_gibbs.add_argument("--seed", type=int)
    p_gibbs.add_argument("--config", help="JSON config file")
    p_gibbs.add_argument("--out")
    p_gibbs.set_defaults(func=cmd_gibbs)

    p_exact = sub.add_parser("exact", help="exact ground-state energy")
    _add_common_model_flags(p_exact)
    p_exact.set_defaults(func=cmd_exact)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
