"""Command line interface: targets, fits, scans, calibration, exports.

Every run writes its outputs as plain CSV/JSON plus a run manifest that
records the subcommand, all resolved options, the base seed, the package
version, and SHA-256 digests of any input files.  ``qnetlocal rerun
<manifest>`` replays the stored options (after checking the input
digests), which reproduces the results up to the documented sampling
floors; fully-seeded steps reproduce exactly.

The default output directory is the current directory, or the value of
the ``QNETLOCAL_OUTDIR`` environment variable when set; ``--out-dir``
overrides both.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from ._output import claim_files, timestamp
from .calibrate import fit_scalings, sampling_error_study, write_calibration_outputs
from .localmodel import (
    LOSS_KINDS,
    SamplingController,
    TrainConfig,
    export_strategies,
    fit_local_model,
    load_checkpoint,
    save_checkpoint,
    strategy_csv_header,
)
from .quantum import (
    DensityMatrix,
    HilbertWiring,
    Povm,
    StateVector,
    bell_state,
    born_distribution,
    coarse_grain,
    rgb4_povm,
    rotated_state,
    tetra_joint_measurement,
    werner,
)
from .scan import (
    ScanError,
    ring_network,
    scan_grid_2d,
    scan_rgb4,
    scan_visibility,
    write_scan_outputs,
)
from .topology import (
    ConfigError,
    Distribution,
    NetworkConfig,
    PartySpec,
    parse_config,
)

OUTDIR_ENV = "QNETLOCAL_OUTDIR"
MANIFEST_VERSION = 1
RING_NAMES = {"triangle": 3, "square": 4, "pentagon": 5}

BELL_KINDS = ("phi_plus", "phi_minus", "psi_plus", "psi_minus")
STATE_CHOICES = BELL_KINDS + ("rotated1", "rotated2")
POVM_CHOICES = ("rgb4", "tetra")


class UsageError(Exception):
    """Bad flag combination detected after argument parsing."""


class PartialFailure(Exception):
    """Some scan points failed; details were already reported."""


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run: subcommand, options, inputs.

    ``inputs`` maps input file paths to their SHA-256 digests; ``outputs``
    lists the files the run wrote.  ``seed`` is the base seed, or None for
    subcommands with no randomness.
    """

    subcommand: str
    options: dict
    seed: int | None
    version: str
    inputs: dict
    outputs: list
    created_utc: str
    manifest_version: int = MANIFEST_VERSION

    def write(self, path: Path) -> Path:
        path = Path(path)
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path) as fh:
            doc = json.load(fh)
        version = doc.get("manifest_version")
        if version != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {version!r}")
        return cls(**doc)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    return f"sha256:{digest}"


def _make_manifest(subcommand: str, options: dict, seed: int | None,
                   inputs: dict, outputs: list[Path]) -> RunManifest:
    return RunManifest(
        subcommand=subcommand,
        options=options,
        seed=seed,
        version=__version__,
        inputs={str(k): v for k, v in inputs.items()},
        outputs=[str(p) for p in outputs],
        created_utc=datetime.now(timezone.utc).isoformat(),
    )


# ---------------------------------------------------------------------------
# shared argument plumbing


def _default_out_dir() -> str:
    return os.environ.get(OUTDIR_ENV, ".")


def parse_grid(text: str) -> list[float]:
    """Parse a grid flag: ``a,b,c`` | ``lo..hi`` (decades) | ``lo..hi:n``.

    ``lo..hi`` steps through powers of ten starting at ``lo``;
    ``lo..hi:n`` is n equally spaced values, endpoints included.
    """
    text = text.strip()
    if ".." in text:
        span, _, count = text.partition(":")
        lo_text, _, hi_text = span.partition("..")
        try:
            lo, hi = float(lo_text), float(hi_text)
        except ValueError:
            raise UsageError(f"bad grid range {text!r}") from None
        if count:
            n = int(count)
            if n < 2:
                raise UsageError("grid ranges need at least 2 points")
            return [float(v) for v in np.linspace(lo, hi, n)]
        if lo <= 0 or hi < lo:
            raise UsageError("decade grids need 0 < lo <= hi")
        values = []
        v = lo
        while v <= hi * (1 + 1e-9):
            values.append(v)
            v *= 10.0
        return values
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"bad grid value in {text!r}") from None


def coarse_map(text: str, n_outcomes: int) -> tuple[int, ...]:
    """Outcome-merging map from a digit string naming the merged outcomes.

    ``"01"`` with 4 outcomes merges outcomes 0 and 1 into one class and
    keeps the rest separate, giving the map (0, 0, 1, 2).
    """
    if not text.isdigit() or len(text) < 2:
        raise UsageError(f"--coarse wants at least two outcome digits, got {text!r}")
    merged = [int(ch) for ch in text]
    if len(set(merged)) != len(merged):
        raise UsageError(f"--coarse digits must be distinct, got {text!r}")
    if max(merged) >= n_outcomes:
        raise UsageError(f"--coarse outcome {max(merged)} out of range for "
                         f"{n_outcomes} outcomes")
    merged_set = set(merged)
    mapping = []
    merged_class = None
    nxt = 0
    for outcome in range(n_outcomes):
        if outcome in merged_set:
            if merged_class is None:
                merged_class = nxt
                nxt += 1
            mapping.append(merged_class)
        else:
            mapping.append(nxt)
            nxt += 1
    return tuple(mapping)


def _resolve_network(value: str, outcomes: int = 4,
                     ) -> tuple[NetworkConfig, dict]:
    """Network from a config file path or a built-in ring name.

    Returns the config plus an input-digest entry when a file was read.
    """
    path = Path(value)
    if path.exists():
        return parse_config(path.read_text()), {str(path): _sha256(path)}
    name = value.lower()
    if name in RING_NAMES:
        return ring_network(RING_NAMES[name], n_outcomes=outcomes), {}
    if name.startswith("ring") and name[4:].isdigit():
        return ring_network(int(name[4:]), n_outcomes=outcomes), {}
    raise UsageError(
        f"network {value!r} is neither a config file nor one of "
        f"{', '.join(sorted(RING_NAMES))}/ring<N>")


def _train_config(options: dict) -> TrainConfig:
    return TrainConfig(
        max_iters=options["max_iters"],
        patience=options["patience"],
        stage2_euclid_iters=options["stage2"],
        learning_rate=options["lr"],
        seed=options["seed"],
        eval_samples=options["eval_samples"],
    )


def _controller(options: dict, n_outcomes: int) -> SamplingController:
    return SamplingController(
        n_outcomes=n_outcomes,
        loss_kind=options["loss"],
        n_min=options["n_min"],
        n_max=options["n_max"],
    )


def _fit_options(args: argparse.Namespace) -> dict:
    return {
        "width": args.width,
        "depth": args.depth,
        "max_iters": args.max_iters,
        "patience": args.patience,
        "lr": args.lr,
        "seed": args.seed,
        "eval_samples": args.eval_samples,
        "loss": args.loss,
        "stage2": args.stage2,
        "restarts": args.restarts,
        "n_min": args.n_min,
        "n_max": args.n_max,
    }


# ---------------------------------------------------------------------------
# quantum-dist


def _build_states(options: dict, n_sources: int, inputs: dict):
    if options["states_npy"]:
        path = Path(options["states_npy"])
        arr = np.load(path)
        inputs[str(path)] = _sha256(path)
        side = int(round(math.sqrt(arr.shape[0])))
        dims = (side, side)
        state = (StateVector(arr, dims) if arr.ndim == 1
                 else DensityMatrix(arr, dims))
    else:
        name = options["states"]
        if name in BELL_KINDS:
            state = bell_state(name)
        else:
            if options["theta"] is None:
                raise UsageError(f"--states {name} needs --theta")
            state = rotated_state(options["theta"], family=int(name[-1]))
    visibility = options["visibility"]
    if visibility != 1.0:
        if not isinstance(state, StateVector):
            raise UsageError("--visibility mixes white noise into a pure state; "
                             "got a density matrix input")
        state = werner(state, visibility)
    return [state] * n_sources


def _build_povms(options: dict, parties, inputs: dict):
    if options["povm_npy"]:
        path = Path(options["povm_npy"])
        arr = np.load(path)
        inputs[str(path)] = _sha256(path)
        if arr.ndim != 3:
            raise UsageError("--povm-npy wants an array of effects with "
                             "shape (n_outcomes, dim, dim)")
        povm = Povm(tuple(arr), dim=arr.shape[1], n_outcomes=arr.shape[0])
    elif options["povm"] == "rgb4":
        if options["u2"] is None:
            raise UsageError("--povm rgb4 needs --u2")
        if not 0.0 <= options["u2"] <= 1.0:
            raise UsageError("--u2 must be in [0, 1]")
        povm = rgb4_povm(math.sqrt(options["u2"]))
    elif options["povm"] == "tetra":
        if options["mu"] is None:
            raise UsageError("--povm tetra needs --mu")
        povm = tetra_joint_measurement(options["mu"])
    else:
        raise UsageError("one of --povm or --povm-npy is required")
    return [povm] * len(parties)


def _run_quantum_dist(options: dict) -> list[Path]:
    per_party = 4
    if options["povm_npy"]:
        peek = np.load(options["povm_npy"], mmap_mode="r")
        if peek.ndim == 3:
            per_party = peek.shape[0]
    config, inputs = _resolve_network(options["network"], outcomes=per_party)
    n_sources = len(config.sources)

    if options["wiring"]:
        order = tuple(int(tok) for tok in options["wiring"].split(","))
        wiring = HilbertWiring(order)
    elif n_sources == 1:
        wiring = HilbertWiring((0, 1))
    else:
        raise UsageError("--wiring is required for networks with more than "
                         "one source")

    states = _build_states(options, n_sources, inputs)
    povms = _build_povms(options, config.parties, inputs)
    dist = born_distribution(config, states, povms, wiring)

    if options["coarse"]:
        outcome_counts = {p.n_outcomes for p in config.parties}
        if len(outcome_counts) != 1:
            raise UsageError("--coarse needs identical outcome counts "
                             "for every party")
        mapping = coarse_map(options["coarse"], outcome_counts.pop())
        dist = coarse_grain(dist, [mapping] * len(config.parties))

    out_dir = Path(options["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if options["out"]:
        dist_path = Path(options["out"])
        dist_path.parent.mkdir(parents=True, exist_ok=True)
        manifest_path = dist_path.with_name(dist_path.name + ".manifest.json")
    else:
        dist_path, manifest_path = claim_files(
            out_dir, f"target_{timestamp()}", (".txt", ".manifest.json"))

    shape = ",".join(str(n) for n in dist.indexer.shape)
    np.savetxt(dist_path, dist.probs, fmt="%.17g",
               header=(f"network target distribution ({dist.probs.size} "
                       f"entries)\nshape: {shape}\nrow-major flat "
                       "probabilities, one per line"))
    manifest = _make_manifest("quantum-dist", options, None, inputs,
                              [dist_path, manifest_path])
    manifest.write(manifest_path)
    print(f"wrote {dist_path}")
    print(f"wrote {manifest_path}")
    return [dist_path, manifest_path]


def cmd_quantum_dist(args: argparse.Namespace) -> list[Path]:
    options = {
        "network": args.network,
        "states": args.states,
        "theta": args.theta,
        "povm": args.povm,
        "u2": args.u2,
        "mu": args.mu,
        "visibility": args.visibility,
        "wiring": args.wiring,
        "coarse": args.coarse,
        "states_npy": args.states_npy,
        "povm_npy": args.povm_npy,
        "out": args.out,
        "out_dir": args.out_dir,
    }
    return _run_quantum_dist(options)


# ---------------------------------------------------------------------------
# fit


def _run_fit(options: dict) -> list[Path]:
    config, inputs = _resolve_network(options["network"])
    target_path = Path(options["target"])
    if not target_path.exists():
        raise UsageError(f"target file {target_path} does not exist")
    inputs[str(target_path)] = _sha256(target_path)

    probs = np.loadtxt(target_path)
    expected = config.indexer().total
    if probs.size != expected:
        raise ConfigError(
            f"target has {probs.size} entries but the network's outcome "
            f"space has {expected}")
    target = Distribution.from_array(probs, config.shape)

    tcfg = _train_config(options)
    ctrl = _controller(options, expected)
    net, result = fit_local_model(
        config, target, tcfg, ctrl,
        width=options["width"], depth=options["depth"],
        restarts=options["restarts"])

    out_dir = Path(options["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path, result_path, manifest_path = claim_files(
        out_dir, f"fit_{timestamp()}",
        (".checkpoint.json", ".result.json", ".manifest.json"))
    save_checkpoint(ckpt_path, net, result, ctrl)
    payload = dict(result.summary_dict(), checkpoint=ckpt_path.name)
    with open(result_path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")

    manifest = _make_manifest("fit", options, options["seed"], inputs,
                              [ckpt_path, result_path, manifest_path])
    manifest.write(manifest_path)
    print(f"final_kl {result.final_kl:.6e}  final_euclid "
          f"{result.final_euclid:.6e}  iterations {result.iterations_run}")
    for p in (ckpt_path, result_path, manifest_path):
        print(f"wrote {p}")
    return [ckpt_path, result_path, manifest_path]


def cmd_fit(args: argparse.Namespace) -> list[Path]:
    options = dict(_fit_options(args), network=args.network,
                   target=args.target, out_dir=args.out_dir)
    return _run_fit(options)


# ---------------------------------------------------------------------------
# scan


SCAN_PRESETS = ("rgb4-u-scan", "rgb4-visibility", "grid2d", "robustness")


def _scan_outcomes_per_party(coarse_text: str | None) -> int:
    if coarse_text is None:
        return 4
    return max(coarse_map(coarse_text, 4)) + 1


def _run_scan(options: dict) -> list[Path]:
    preset = options["preset"]
    tcfg = _train_config(options)
    inputs: dict = {}

    if preset in ("rgb4-u-scan", "rgb4-visibility"):
        config = ring_network(3)
        coarse = None
    else:
        coarse = (coarse_map(options["coarse"], 4)
                  if options["coarse"] else None)
        per_party = 4 if coarse is None else max(coarse) + 1
        config, inputs = _resolve_network(options["network"],
                                          outcomes=per_party)
        if coarse is not None and any(p.n_outcomes != per_party
                                      for p in config.parties):
            # A coarse map shrinks the model's outcome space below what a
            # config file declares for the raw measurements.
            config = NetworkConfig(tuple(
                PartySpec(p.name, p.sources, per_party)
                for p in config.parties))

    n_outcomes = int(np.prod(config.shape))
    ctrl = _controller(options, n_outcomes)
    fit_kwargs = dict(width=options["width"], depth=options["depth"],
                      restarts=options["restarts"], jobs=options["jobs"])

    failures = []
    try:
        if preset == "rgb4-u-scan":
            results = scan_rgb4(options["u2_grid"], options["visibility"],
                                tcfg, ctrl, **fit_kwargs)
        elif preset == "rgb4-visibility":
            results = scan_visibility(options["v_grid"], u2=options["u2"],
                                      tcfg=tcfg, ctrl=ctrl, **fit_kwargs)
        elif preset == "grid2d":
            results = scan_grid_2d(config, options["theta_grid"],
                                   options["mu_grid"],
                                   state_family=options["family"],
                                   coarse=coarse, tcfg=tcfg, ctrl=ctrl,
                                   **fit_kwargs)
        elif preset == "robustness":
            results = scan_visibility(options["v_grid"],
                                      theta=options["theta"],
                                      mu=options["mu"], network=config,
                                      state_family=options["family"],
                                      coarse=coarse, tcfg=tcfg, ctrl=ctrl,
                                      **fit_kwargs)
        else:
            raise UsageError(f"unknown preset {preset!r}")
    except ScanError as exc:
        results = exc.completed
        failures = exc.failures

    outputs: list[Path] = []
    if results:
        csv_path, json_path = write_scan_outputs(
            preset, results, options["out_dir"], tcfg, ctrl,
            settings=options)
        manifest_path = json_path.with_name(
            json_path.name[:-len(".json")] + ".manifest.json")
        outputs = [csv_path, json_path, manifest_path]
        manifest = _make_manifest("scan", options, options["seed"], inputs,
                                  outputs)
        manifest.write(manifest_path)
        for p in outputs:
            print(f"wrote {p}")

    if failures:
        print(f"{len(failures)} scan point(s) failed:", file=sys.stderr)
        for params, error in failures:
            print(f"  {params}: {error}", file=sys.stderr)
        raise PartialFailure(f"{len(failures)} scan points failed")
    return outputs


def cmd_scan(args: argparse.Namespace) -> list[Path]:
    preset = args.preset
    options = dict(
        _fit_options(args),
        preset=preset,
        jobs=args.jobs,
        out_dir=args.out_dir,
        network=args.network or "triangle",
        family=args.family,
        coarse=args.coarse,
    )
    if preset == "rgb4-u-scan":
        options["u2_grid"] = (parse_grid(args.u2_grid) if args.u2_grid
                              else [float(v) for v in np.linspace(0.5, 1.0, 26)])
        options["visibility"] = args.visibility
    elif preset == "rgb4-visibility":
        options["u2"] = args.u2 if args.u2 is not None else 0.85
        options["v_grid"] = (parse_grid(args.v_grid) if args.v_grid
                             else [float(v) for v in np.linspace(0.8, 1.0, 21)])
    elif preset == "grid2d":
        options["theta_grid"] = (parse_grid(args.theta_grid) if args.theta_grid
                                 else [float(v) for v in np.linspace(0.0, math.pi, 25)])
        options["mu_grid"] = (parse_grid(args.mu_grid) if args.mu_grid
                              else [float(v) for v in np.linspace(0.0, math.pi / 2, 13)])
    elif preset == "robustness":
        options["theta"] = args.theta if args.theta is not None else math.pi / 2
        options["mu"] = args.mu if args.mu is not None else 0.0
        options["v_grid"] = (parse_grid(args.v_grid) if args.v_grid
                             else [float(v) for v in np.linspace(0.75, 1.0, 26)])
    return _run_scan(options)


# ---------------------------------------------------------------------------
# calibrate


def _run_calibrate(options: dict) -> list[Path]:
    report = sampling_error_study(options["outcomes"], options["samples"],
                                  trials=options["trials"],
                                  seed=options["seed"])
    try:
        fits = fit_scalings(report)
    except ValueError as exc:
        print(f"note: scaling fits skipped ({exc})", file=sys.stderr)
        fits = None
    csv_path, json_path = write_calibration_outputs(
        "study", report, fits, options["out_dir"], settings=options)
    manifest_path = json_path.with_name(
        json_path.name[:-len(".json")] + ".manifest.json")
    outputs = [csv_path, json_path, manifest_path]
    manifest = _make_manifest("calibrate", options, options["seed"], {},
                              outputs)
    manifest.write(manifest_path)
    if fits is not None:
        print(f"c_euclid {fits.c_euclid:.4f}  c_kl {fits.c_kl:.4f}  "
              f"euclid exponent {fits.euclid_exponent:+.4f}  "
              f"kl sample exponent {fits.kl_sample_exponent:+.4f}")
    for p in outputs:
        print(f"wrote {p}")
    return outputs


def cmd_calibrate(args: argparse.Namespace) -> list[Path]:
    outcomes = [int(v) for v in parse_grid(args.outcomes)]
    samples = [int(v) for v in parse_grid(args.samples)]
    options = {
        "outcomes": outcomes,
        "samples": samples,
        "trials": args.trials,
        "seed": args.seed,
        "out_dir": args.out_dir,
    }
    return _run_calibrate(options)


# ---------------------------------------------------------------------------
# export-strats


def _run_export_strats(options: dict) -> list[Path]:
    ckpt_path = Path(options["checkpoint"])
    if not ckpt_path.exists():
        raise UsageError(f"checkpoint {ckpt_path} does not exist")
    inputs = {str(ckpt_path): _sha256(ckpt_path)}
    net, _doc = load_checkpoint(ckpt_path)

    party_names = [p.name for p in net.config.parties]
    if options["party"]:
        if options["party"] not in party_names:
            raise UsageError(f"party {options['party']!r} not in network "
                             f"(parties: {', '.join(party_names)})")
        party_names = [options["party"]]

    out_dir = Path(options["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp = timestamp()
    outputs: list[Path] = []
    for name in party_names:
        rows = export_strategies(net, name, options["resolution"])
        outcomes = rows.shape[1] - 2
        (path,) = claim_files(out_dir, f"strategies_{name}_{stamp}", (".csv",))
        np.savetxt(path, rows, fmt="%.10g", delimiter=",",
                   header=strategy_csv_header(outcomes), comments="")
        outputs.append(path)
    (manifest_path,) = claim_files(out_dir, f"strategies_{stamp}",
                                   (".manifest.json",))
    outputs.append(manifest_path)
    manifest = _make_manifest("export-strats", options, None, inputs, outputs)
    manifest.write(manifest_path)
    for p in outputs:
        print(f"wrote {p}")
    return outputs


def cmd_export_strats(args: argparse.Namespace) -> list[Path]:
    options = {
        "checkpoint": args.checkpoint,
        "party": args.party,
        "resolution": args.resolution,
        "out_dir": args.out_dir,
    }
    return _run_export_strats(options)


# ---------------------------------------------------------------------------
# rerun


_RUNNERS = {
    "quantum-dist": _run_quantum_dist,
    "fit": _run_fit,
    "scan": _run_scan,
    "calibrate": _run_calibrate,
    "export-strats": _run_export_strats,
}


def cmd_rerun(args: argparse.Namespace) -> list[Path]:
    manifest = RunManifest.load(args.manifest)
    runner = _RUNNERS.get(manifest.subcommand)
    if runner is None:
        raise UsageError(f"manifest subcommand {manifest.subcommand!r} "
                         "is not rerunnable")
    for path_text, recorded in manifest.inputs.items():
        path = Path(path_text)
        if not path.exists():
            raise UsageError(f"manifest input {path} no longer exists")
        actual = _sha256(path)
        if actual != recorded:
            raise UsageError(f"manifest input {path} changed since the "
                             f"original run ({recorded} -> {actual})")
    options = dict(manifest.options)
    if args.out_dir is not None:
        options["out_dir"] = args.out_dir
    if options.get("out"):
        # Replays claim fresh filenames instead of clobbering the original.
        options["out"] = None
    return runner(options)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnetlocal",
        description=("Quantum network targets, neural-network local-model "
                     "fits, scans and calibration."))
    parser.add_argument("--version", action="version",
                        version=f"qnetlocal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    out_parent = argparse.ArgumentParser(add_help=False)
    out_parent.add_argument("--out-dir", default=_default_out_dir(),
                            help="output directory (default: "
                                 f"${OUTDIR_ENV} or '.')")

    fit_parent = argparse.ArgumentParser(add_help=False)
    fit_parent.add_argument("--width", type=int, default=60,
                            help="hidden-layer width per party (default 60)")
    fit_parent.add_argument("--depth", type=int, default=4,
                            help="number of hidden layers (default 4)")
    fit_parent.add_argument("--max-iters", type=int, default=10_000,
                            help="iteration budget per stage (default 10000)")
    fit_parent.add_argument("--patience", type=int, default=1_000,
                            help="stop after this many iterations without "
                                 "improvement (default 1000)")
    fit_parent.add_argument("--lr", type=float, default=1e-3,
                            help="Adam learning rate (default 1e-3)")
    fit_parent.add_argument("--seed", type=int, default=0,
                            help="base seed (default 0)")
    fit_parent.add_argument("--eval-samples", type=int, default=1_000_000,
                            help="hidden-variable samples for the final "
                                 "distance estimates (default 1e6)")
    fit_parent.add_argument("--loss", choices=LOSS_KINDS, default="kl",
                            help="training loss (default kl)")
    fit_parent.add_argument("--stage2", type=int, default=0,
                            help="extra Euclidean polish iterations; >0 "
                                 "enables the two-stage schedule")
    fit_parent.add_argument("--restarts", type=int, default=1,
                            help="independent restarts, best kept (default 1)")
    fit_parent.add_argument("--n-min", type=int, default=1_000,
                            help="sample-count floor (default 1000)")
    fit_parent.add_argument("--n-max", type=int, default=20_000,
                            help="sample-count ceiling (default 20000)")

    qd = sub.add_parser("quantum-dist", parents=[out_parent],
                        help="write a target distribution from a quantum "
                             "realization")
    qd.add_argument("--network", required=True,
                    help="config JSON file, or triangle/square/pentagon/ring<N>")
    qd.add_argument("--states", choices=STATE_CHOICES, default="psi_plus",
                    help="source state family (default psi_plus)")
    qd.add_argument("--theta", type=float, default=None,
                    help="rotation angle for the rotated state families")
    qd.add_argument("--povm", choices=POVM_CHOICES, default=None,
                    help="joint measurement family")
    qd.add_argument("--u2", type=float, default=None,
                    help="u^2 parameter of the rgb4 measurement")
    qd.add_argument("--mu", type=float, default=None,
                    help="mu parameter of the tetra measurement")
    qd.add_argument("--visibility", type=float, default=1.0,
                    help="Werner visibility of every source (default 1)")
    qd.add_argument("--wiring", default=None,
                    help="comma-separated particle order, e.g. 5,0,1,2,3,4")
    qd.add_argument("--coarse", default=None,
                    help="digits of outcomes to merge, e.g. 01")
    qd.add_argument("--states-npy", default=None,
                    help="raw state vector or density matrix (.npy)")
    qd.add_argument("--povm-npy", default=None,
                    help="raw effects array (.npy, shape outcomes x dim x dim)")
    qd.add_argument("--out", default=None,
                    help="exact output file (default: claimed name in out-dir)")
    qd.set_defaults(handler=cmd_quantum_dist)

    fit = sub.add_parser("fit", parents=[out_parent, fit_parent],
                         help="fit a local model to a target distribution")
    fit.add_argument("--network", required=True,
                     help="config JSON file, or triangle/square/pentagon/ring<N>")
    fit.add_argument("--target", required=True,
                     help="target distribution file (one probability per line)")
    fit.set_defaults(handler=cmd_fit)

    scan = sub.add_parser("scan", parents=[out_parent, fit_parent],
                          help="run a preset parameter scan")
    scan.add_argument("--preset", choices=SCAN_PRESETS, required=True)
    scan.add_argument("--network", default=None,
                      help="ring name or config file (grid2d/robustness; "
                           "default triangle)")
    scan.add_argument("--family", type=int, choices=(1, 2), default=1,
                      help="rotated-state family (default 1)")
    scan.add_argument("--coarse", default=None,
                      help="digits of outcomes to merge, e.g. 01")
    scan.add_argument("--u2", type=float, default=None,
                      help="fixed u^2 (rgb4-visibility; default 0.85)")
    scan.add_argument("--u2-grid", default=None,
                      help="u^2 grid (rgb4-u-scan; default 0.5..1.0:26)")
    scan.add_argument("--v-grid", default=None,
                      help="visibility grid (rgb4-visibility/robustness)")
    scan.add_argument("--theta-grid", default=None,
                      help="theta grid (grid2d; default 0..pi:25)")
    scan.add_argument("--mu-grid", default=None,
                      help="mu grid (grid2d; default 0..pi/2:13)")
    scan.add_argument("--theta", type=float, default=None,
                      help="fixed theta (robustness; default pi/2)")
    scan.add_argument("--mu", type=float, default=None,
                      help="fixed mu (robustness; default 0)")
    scan.add_argument("--visibility", type=float, default=1.0,
                      help="fixed visibility (rgb4-u-scan; default 1)")
    scan.add_argument("--jobs", type=int, default=1,
                      help="parallel scan workers (default 1)")
    scan.set_defaults(handler=cmd_scan)

    cal = sub.add_parser("calibrate", parents=[out_parent],
                         help="measure sampling-error scaling laws")
    cal.add_argument("--outcomes", default="4,16,64,256",
                     help="outcome counts (default 4,16,64,256)")
    cal.add_argument("--samples", default="1e3..1e6",
                     help="sample counts (default 1e3..1e6, decades)")
    cal.add_argument("--trials", type=int, default=200,
                     help="trials per cell (default 200)")
    cal.add_argument("--seed", type=int, default=0)
    cal.set_defaults(handler=cmd_calibrate)

    ex = sub.add_parser("export-strats", parents=[out_parent],
                        help="export a trained model's response functions")
    ex.add_argument("--checkpoint", required=True,
                    help="checkpoint file written by fit")
    ex.add_argument("--party", default=None,
                    help="party name (default: all parties)")
    ex.add_argument("--resolution", type=int, default=64,
                    help="hidden-variable grid resolution (default 64)")
    ex.set_defaults(handler=cmd_export_strats)

    rr = sub.add_parser("rerun",
                        help="replay a run from its manifest")
    rr.add_argument("manifest", help="manifest JSON written by a previous run")
    rr.add_argument("--out-dir", default=None,
                    help="redirect outputs (default: original out-dir)")
    rr.set_defaults(handler=cmd_rerun)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except PartialFailure:
        return 1
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
