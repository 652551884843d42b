"""Command-line pipeline: generate, train, design, evaluate, selftest.

Every subcommand is deterministic given the config and seeds, and stamps the
config hash into its outputs. Exit codes: 0 success, 1 usage or config
error, 2 data error, 3 numerical failure.
"""

import argparse
import sys

import numpy as np

from . import data as data_mod
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, apply_override, load_config
from .errors import (
    CheckpointError,
    DataFormatError,
    DegenerateDataError,
    InvalidArgumentError,
    InvalidCandidateError,
    InvalidConfigError,
    InvalidGeometryError,
    InvalidInputError,
    NumericalConsistencyError,
    PdnError,
    TrainingDivergedError,
)
from .forward import FrequencyGrid, StructureGeometry, spectrum
from .inverse import design, find_modes, spectrum_mse, write_report
from .network import (
    MixtureParams,
    backward_batch,
    finite_difference_gradients,
    forward,
    gradient_relative_error,
    init_weights,
)
from .network import NetworkConfig
from .pca import density_map, fit_pca, write_density_csv, write_density_svg
from .training import train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

_USAGE_ERRORS = (InvalidConfigError, InvalidArgumentError, InvalidGeometryError)
_DATA_ERRORS = (
    FileNotFoundError,
    DataFormatError,
    InvalidInputError,
    CheckpointError,
    InvalidCandidateError,
)
_NUMERICAL_ERRORS = (NumericalConsistencyError, TrainingDivergedError, DegenerateDataError)


class _UsageError(PdnError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (defaults apply otherwise)")
    common.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a single config value, e.g. training.epochs=50",
    )
    common.add_argument("--threads", type=int, help="worker threads for data generation")

    parser = _Parser(prog="pdn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate a labelled corpus", parents=[common])
    g.add_argument("--out", required=True, help="output dataset path")
    g.add_argument("--levels", type=int, help="radius levels per layer (grid corpus)")
    g.add_argument("--layers", type=int, help="number of layers")
    g.add_argument("--kind", choices=["grid", "random"], default="grid")
    g.add_argument("--count", type=int, help="sample count (random corpus)")
    g.add_argument("--seed", type=int, help="seed (random corpus)")
    g.add_argument("--csv", help="also export the corpus as CSV")

    t = sub.add_parser("train", help="train the mixture network on a corpus", parents=[common])
    t.add_argument("--data", required=True, help="dataset path from 'generate'")
    t.add_argument("--out", required=True, help="checkpoint output path")
    t.add_argument("--log", help="per-epoch CSV log path")
    t.add_argument("--epochs", type=int, help="override training epochs")
    t.add_argument("--seed", type=int, help="override training seed")

    d = sub.add_parser("design", help="inverse-design candidates for a target spectrum", parents=[common])
    d.add_argument("--checkpoint", required=True)
    d.add_argument("--out", required=True, help="candidate report path (JSON)")
    target = d.add_mutually_exclusive_group(required=True)
    target.add_argument("--target", help="CSV file with the target spectrum")
    target.add_argument(
        "--from-structure",
        help="comma-separated radii in mm; target synthesized by the forward model",
    )
    target.add_argument("--builtin", choices=["wide-bandgap"], help="named built-in target")
    d.add_argument("--viz", help="density-map output prefix (writes PREFIX.csv and PREFIX.svg)")
    d.add_argument("--viz-resolution", type=int, default=200)

    e = sub.add_parser("evaluate", help="run the forward model on a structure", parents=[common])
    e.add_argument("--structure", required=True, help="comma-separated radii in mm")
    e.add_argument("--out", required=True, help="spectrum CSV output path")
    e.add_argument("--target", help="optional target CSV; prints MSE and quality factor")
    e.add_argument(
        "--bare",
        action="store_true",
        help="write positional values only, no frequency column",
    )

    sub.add_parser("selftest", help="run the fast invariant suite", parents=[common])
    return parser


def _run_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    for override in args.set:
        key, sep, value = override.partition("=")
        if not sep:
            raise InvalidConfigError(f"--set expects SECTION.KEY=VALUE, got {override!r}")
        config = apply_override(config, key.strip(), value.strip())
    if args.threads is not None:
        config = apply_override(config, "threads", str(args.threads))
    return config


def _parse_structure(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise InvalidArgumentError(f"cannot parse radii list {text!r}: {exc}") from exc


def _load_target_csv(path, expected: int) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if lines and lines[0].lower().replace(" ", "") == "frequency_hz,transmittance":
        values = [float(line.split(",")[1]) for line in lines[1:]]
    else:
        values = [float(line.split(",")[-1]) for line in lines]
    if len(values) != expected:
        raise InvalidInputError(
            f"target spectrum in {path} has {len(values)} values, expected {expected}"
        )
    return np.array(values)


def wide_bandgap_target(grid: FrequencyGrid) -> np.ndarray:
    """Piecewise template: full transmission outside 1500-3500 Hz, a 0.05
    stop-band floor inside, with raised-cosine tapers 400 Hz wide."""
    f = grid.frequencies()
    lo, hi, taper, floor = 1500.0, 3500.0, 400.0, 0.05
    depth = np.zeros_like(f)
    inside = (f >= lo) & (f <= hi)
    depth[inside] = 1.0
    rising = (f > lo - taper) & (f < lo)
    depth[rising] = 0.5 * (1.0 + np.cos(np.pi * (lo - f[rising]) / taper))
    falling = (f > hi) & (f < hi + taper)
    depth[falling] = 0.5 * (1.0 + np.cos(np.pi * (f[falling] - hi) / taper))
    return 1.0 - (1.0 - floor) * depth


def _write_spectrum_csv(path, grid: FrequencyGrid, values, bare: bool) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if bare:
            for v in values:
                fh.write(f"{v:.17g}\n")
        else:
            fh.write("frequency_hz,transmittance\n")
            for f, v in zip(grid.frequencies(), values):
                fh.write(f"{f:.17g},{v:.17g}\n")


def cmd_generate(args, config: RunConfig) -> int:
    from dataclasses import replace

    data_cfg = config.data
    if args.levels is not None:
        data_cfg = replace(data_cfg, levels=args.levels)
    if args.count is not None:
        data_cfg = replace(data_cfg, random_count=args.count)
    if args.seed is not None:
        data_cfg = replace(data_cfg, seed=args.seed)
    geometry = config.geometry
    if args.layers is not None:
        geometry = replace(geometry, layers=args.layers)
    config = replace(config, data=data_cfg, geometry=geometry)

    if args.kind == "grid":
        dataset = data_mod.generate_grid_corpus(
            config.level_values(),
            layers=geometry.layers,
            grid=config.grid,
            layer_length=geometry.layer_length,
            host_radius=geometry.host_radius,
            medium=config.medium,
            threads=config.threads,
        )
    else:
        dataset = data_mod.generate_random_corpus(
            config.data.random_count,
            seed=config.data.seed,
            bounds=(geometry.min_radius, geometry.max_radius),
            layers=geometry.layers,
            grid=config.grid,
            layer_length=geometry.layer_length,
            host_radius=geometry.host_radius,
            medium=config.medium,
            exclude_levels=config.level_values(),
            threads=config.threads,
        )
    data_mod.save(dataset, args.out)
    if args.csv:
        data_mod.export_csv(dataset, args.csv)
    print(
        f"wrote {dataset.n_samples} samples to {args.out} "
        f"(kind={dataset.kind}, grid {config.grid.start_hz}-"
        f"{config.grid.start_hz + config.grid.step_hz * (config.grid.count - 1)} Hz "
        f"x{config.grid.count}, bounds [{dataset.min_radius}, {dataset.max_radius}] mm)"
    )
    print(f"config_hash={config.config_hash}")
    print(f"dataset_hash={dataset.config_digest}")
    return EXIT_OK


def cmd_train(args, config: RunConfig) -> int:
    from dataclasses import replace

    train_cfg = config.training
    if args.epochs is not None:
        train_cfg = replace(train_cfg, epochs=args.epochs)
    if args.seed is not None:
        train_cfg = replace(train_cfg, seed=args.seed)
    config = replace(config, training=train_cfg)

    raw = data_mod.load(args.data)
    normalized, stats = data_mod.normalize(raw)
    net_config = config.network.to_network_config(raw.grid.count, raw.layers)
    weights, log = train(normalized, net_config, config.training)

    checkpoint = Checkpoint(
        weights=weights,
        normalization=stats,
        grid=raw.grid,
        layer_length=raw.layer_length,
        host_radius=raw.host_radius,
        medium=raw.medium,
        config_hash=config.config_hash,
    )
    save_checkpoint(checkpoint, args.out)
    if args.log:
        log.to_csv(args.log, config_hash=config.config_hash)
    first, best = log.records[0], log.records[log.best_epoch]
    print(
        f"trained {config.training.epochs} epochs on {raw.n_samples} samples: "
        f"val nll {first.val_nll:.4f} -> {best.val_nll:.4f} (best epoch {best.epoch})"
    )
    print(f"checkpoint written to {args.out}")
    print(f"config_hash={config.config_hash}")
    return EXIT_OK


def cmd_design(args, config: RunConfig) -> int:
    model = load_checkpoint(args.checkpoint)
    expected = model.weights.config.input_dim
    if args.target:
        target = _load_target_csv(args.target, expected)
        source = f"file:{args.target}"
    elif args.from_structure:
        radii = _parse_structure(args.from_structure)
        geometry = StructureGeometry(radii, model.layer_length, model.host_radius)
        target = spectrum(geometry, model.grid, model.medium)
        source = f"structure:{args.from_structure}"
    else:
        target = wide_bandgap_target(model.grid)
        source = f"builtin:{args.builtin}"

    candidates = design(model, target, config.mode_search)
    write_report(candidates, args.out, target_source=source, config_hash=config.config_hash)
    print(f"{len(candidates)} candidates written to {args.out}")
    for i, c in enumerate(candidates[:5]):
        radii = ", ".join(f"{v:.2f}" for v in c.radii_mm)
        flags = "" if c.in_bounds else " [out of bounds]"
        print(
            f"  #{i + 1}: ({radii}) mm  quality={c.quality_factor:.4f} "
            f"density={c.density_at_mode:.3e}{flags}"
        )

    if args.viz:
        stats = model.normalization
        params = forward(model.weights, stats.normalize_inputs(target))
        pca = fit_pca(params.mu, weights=params.pi)
        modes = [stats.normalize_outputs(c.radii_mm) for c in candidates]
        dmap = density_map(params, pca, resolution=args.viz_resolution, modes=modes)
        write_density_csv(dmap, f"{args.viz}.csv")
        write_density_svg(dmap, f"{args.viz}.svg")
        print(f"density map written to {args.viz}.csv and {args.viz}.svg")
    print(f"config_hash={config.config_hash}")
    return EXIT_OK


def cmd_evaluate(args, config: RunConfig) -> int:
    radii = _parse_structure(args.structure)
    geometry = StructureGeometry(
        radii, config.geometry.layer_length, config.geometry.host_radius
    )
    values = spectrum(geometry, config.grid, config.medium)
    _write_spectrum_csv(args.out, config.grid, values, bare=args.bare)
    print(f"spectrum written to {args.out}")
    if args.target:
        target = _load_target_csv(args.target, config.grid.count)
        mse = float(np.mean((values - target) ** 2))
        print(f"mse={mse:.17g}")
        print(f"quality_factor={1.0 / (1.0 + mse):.17g}")
    print(f"config_hash={config.config_hash}")
    return EXIT_OK


def cmd_selftest(args, config: RunConfig) -> int:
    checks: list[tuple[str, bool, str]] = []

    # Analytic gradients against central finite differences.
    rng = np.random.default_rng(0)
    net = NetworkConfig(input_dim=8, hidden_layers=(16,), components=3, output_dim=2, seed=1)
    w = init_weights(net)
    for a in w.arrays:
        a += 0.1 * rng.standard_normal(a.shape)
    X, Y = rng.standard_normal((3, 8)), rng.standard_normal((3, 2))
    _, grads = backward_batch(w, X, Y)
    err = gradient_relative_error(grads, finite_difference_gradients(w, X, Y))
    checks.append(("gradient vs finite differences", err < 1e-4, f"max rel err {err:.2e}"))

    # Forward-model reciprocity and passivity.
    worst_rec, worst_tau = 0.0, 0.0
    g = config.geometry
    for _ in range(20):
        radii = tuple(rng.uniform(g.min_radius, g.max_radius, g.layers))
        s = StructureGeometry(radii, g.layer_length, g.host_radius)
        spec = spectrum(s, config.grid, config.medium)
        worst_rec = max(
            worst_rec, float(np.max(np.abs(spec - spectrum(s.reversed(), config.grid, config.medium))))
        )
        worst_tau = max(worst_tau, float(spec.max()))
    checks.append(("reciprocity", worst_rec < 1e-10, f"max |fwd - rev| {worst_rec:.2e}"))
    checks.append(("passivity", worst_tau <= 1.0 + 1e-9, f"max transmittance {worst_tau:.12f}"))
    uniform = StructureGeometry((g.host_radius,) * g.layers, g.layer_length, g.host_radius)
    uniform_gap = float(np.max(np.abs(spectrum(uniform, config.grid, config.medium) - 1.0)))
    checks.append(("matched duct transmits fully", uniform_gap < 1e-12, f"gap {uniform_gap:.2e}"))

    # Normalization round trip on a small corpus.
    grid = FrequencyGrid(100.0, 200.0, 12)
    corpus = data_mod.generate_grid_corpus(
        [4.0, 9.0, 14.0], layers=2, grid=grid,
        layer_length=g.layer_length, host_radius=g.host_radius, medium=config.medium,
    )
    normalized, stats = data_mod.normalize(corpus)
    x_gap = float(np.max(np.abs(stats.denormalize_inputs(normalized.spectra) - corpus.spectra)))
    y_gap = float(np.max(np.abs(stats.denormalize_outputs(normalized.radii) - corpus.radii)))
    ok = x_gap < 1e-12 and y_gap < 1e-12
    checks.append(("normalization round trip", ok, f"max gap {max(x_gap, y_gap):.2e}"))

    # Mode finder against a dense 1-D search.
    params = MixtureParams(
        pi=np.array([0.5, 0.5]),
        mu=np.array([[0.3], [0.7]]),
        sigma=np.array([0.08, 0.08]),
    )
    modes = find_modes(params, config.mode_search)
    ys = np.linspace(0.0, 1.0, 200001)[:, None]
    from .inverse import density_batch

    dens = density_batch(params, ys)
    interior = (dens[1:-1] > dens[:-2]) & (dens[1:-1] > dens[2:])
    grid_modes = ys[1:-1][interior, 0]
    found = np.sort([m.point[0] for m in modes])
    ok = len(found) == len(grid_modes) and np.allclose(found, np.sort(grid_modes), atol=1e-4)
    checks.append(
        ("mode finder vs dense grid", ok, f"{len(found)} modes at {np.round(found, 4).tolist()}")
    )

    failures = 0
    for name, passed, detail in checks:
        status = "pass" if passed else "FAIL"
        print(f"[{status}] {name}: {detail}")
        failures += 0 if passed else 1
    return EXIT_OK if failures == 0 else EXIT_NUMERICAL


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "design": cmd_design,
    "evaluate": cmd_evaluate,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _run_config(args)
        return _COMMANDS[args.command](args, config)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _USAGE_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
