"""Command-line front end.

Every subcommand writes its outputs plus a ``run.meta`` record of
``key=value`` lines into ``--out``. Exit status: 0 on success, 1 on
input or data errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import platform
import sys
from pathlib import Path

import matplotlib
import numpy as np

from . import __version__, figures
from .errors import TaskingError
from .grid import (estimate_global_variance, load_grid, load_predictions, resize_bilinear,
                   save_grid, tile_image, upsample_tile)
from .heatmap import decode_ppm, render_heatmap
from .mdp import (CloudModel, TaskingMdp, load_policy, realize_clouds, save_cloud_field,
                  save_policy, simulate_trajectory, value_iteration)
from .search import CostModel, GridPos, save_path, select_goal, ucs
from .stochastic import GoalMode, McConfig, path_indicator, path_probability_matrix, sharpness
from .synth import PATTERNS, synth_grid, synth_raster

META_FILE = "run.meta"
# parameters that are not replayed verbatim
_NOT_PARAMS = {"command", "func", "out"}


def _pos(text: str) -> GridPos:
    try:
        r, c = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'row,col', got {text!r}") from None
    return GridPos(r, c)


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'height,width', got {text!r}") from None
    if h < 1 or w < 1:
        raise argparse.ArgumentTypeError("sizes must be >= 1")
    return h, w


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _probability(text: str) -> float:
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return v


def _band(text: str):
    """``r0:r1,c0:c1`` half-open row/col ranges."""
    try:
        rs, cs = text.split(",")
        r0, r1 = (int(t) for t in rs.split(":"))
        c0, c1 = (int(t) for t in cs.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'r0:r1,c0:c1', got {text!r}") from None
    return r0, r1, c0, c1


def _add_common(p, seed=True):
    p.add_argument("--out", default="out", help="output directory")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-figures", action="store_true", help="skip matplotlib PNG figures")


def _add_clouds(p):
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=_positive_int, default=10_000)
    p.add_argument("--p-init", type=_probability, default=0.2)
    p.add_argument("--p10", type=_probability, default=0.5, help="p(cloudy | previously clear)")
    p.add_argument("--p11", type=_probability, default=0.5, help="p(cloudy | previously cloudy)")
    p.add_argument("--terminal-mode", choices=("episodic", "absorbing"), default="episodic")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsmtask", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic reward grid")
    p.add_argument("--rows", type=_positive_int, default=33)
    p.add_argument("--cols", type=_positive_int, default=33)
    p.add_argument("--pattern", choices=PATTERNS, default="blobs")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tile", help="tile a raster and upsample each tile")
    p.add_argument("--image", help=".npy array or binary PPM; a seeded random raster if omitted")
    p.add_argument("--height", type=_positive_int, default=400, help="synthetic raster height")
    p.add_argument("--width", type=_positive_int, default=400, help="synthetic raster width")
    p.add_argument("--resize", type=_size, help="resize to 'height,width' before tiling")
    p.add_argument("--grid-rows", type=_positive_int, default=33)
    p.add_argument("--grid-cols", type=_positive_int, default=33)
    p.add_argument("--tile-size", type=_positive_int, default=12)
    p.add_argument("--upsample", type=_positive_int, default=28)
    _add_common(p)
    p.set_defaults(func=cmd_tile)

    p = sub.add_parser("ucs", help="uniform cost search to the lowest-FSM tile")
    p.add_argument("--grid", required=True)
    p.add_argument("--start", type=_pos, default=GridPos(0, 0))
    p.add_argument("--goal", type=_pos, help="defaults to the lowest-valued tile")
    p.add_argument("--cost", choices=("unit", "fsm"), default="fsm")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_ucs)

    p = sub.add_parser("mc", help="Monte Carlo path probability matrix")
    p.add_argument("--grid", required=True)
    p.add_argument("--start", type=_pos, default=GridPos(0, 0))
    p.add_argument("--iters", type=_positive_int, default=1000)
    noise = p.add_mutually_exclusive_group(required=True)
    noise.add_argument("--sigma2", type=_nonneg_float)
    noise.add_argument("--predictions", help="estimate sigma2 from a prediction set file")
    p.add_argument("--cost", choices=("unit", "fsm"), default="fsm")
    p.add_argument("--goal-mode", choices=[m.value for m in GoalMode], default="per_realization")
    _add_common(p)
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("vi", help="value iteration on the cloud-aware MDP")
    p.add_argument("--grid", required=True)
    _add_clouds(p)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_vi)

    p = sub.add_parser("simulate", help="roll out the MDP policy under a realized cloud field")
    p.add_argument("--grid", required=True)
    p.add_argument("--start", type=_pos, default=GridPos(0, 0))
    p.add_argument("--steps", type=_positive_int, help="max trajectory length (default 4*(rows+cols))")
    p.add_argument("--policy", help="reuse a policy file written by 'vi'")
    p.add_argument("--band", type=_band, help="force clouds at t=0 in 'r0:r1,c0:c1'")
    _add_clouds(p)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("variance", help="global prediction variance of a prediction set")
    p.add_argument("--predictions", required=True)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("replay", help="re-run a command from its run.meta record")
    p.add_argument("--meta", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay)
    return parser


def _cost(name: str) -> CostModel:
    return CostModel.parse(name)


def _clouds(args) -> CloudModel:
    return CloudModel(args.p_init, args.p10, args.p11)


def _write_meta(out: Path, args, extra=None):
    lines = [f"command={args.command}", f"fsmtask={__version__}", f"numpy={np.__version__}",
             f"matplotlib={matplotlib.__version__}", f"python={platform.python_version()}"]
    params = {}
    for key, value in sorted(vars(args).items()):
        if key in _NOT_PARAMS or value is None or value is False:
            continue
        if key in ("grid", "predictions", "image", "policy"):
            value = str(Path(value).resolve())
        elif isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
            if key == "band":
                r0, r1, c0, c1 = value.split(",")
                value = f"{r0}:{r1},{c0}:{c1}"
        params[key] = value
    if "seed" not in params:
        params["seed"] = "none"
    lines += [f"param.{k}={v}" for k, v in params.items()]
    for k, v in (extra or {}).items():
        lines.append(f"result.{k}={v}")
    (out / META_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_meta(path) -> dict:
    meta = {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in ln:
            k, v = ln.split("=", 1)
            meta[k] = v
    return meta


def replay_argv(meta: dict, out) -> list[str]:
    """Reconstruct the argv that produced a ``run.meta`` record."""
    argv = [meta["command"]]
    for key, value in meta.items():
        if not key.startswith("param."):
            continue
        name = key[len("param."):]
        if name == "seed" and value == "none":
            continue
        flag = "--" + name.replace("_", "-")
        if value == "True":
            argv.append(flag)
        else:
            argv += [flag, value]
    return argv + ["--out", str(out)]


def _load_image(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        return np.load(path)
    data = path.read_bytes()
    try:
        return decode_ppm(data) / 255.0
    except (ValueError, IndexError):
        raise TaskingError(f"{path}: unsupported image; use .npy or binary PPM (P6)") from None


def cmd_synth(args, out: Path):
    grid = synth_grid(args.rows, args.cols, args.pattern, args.seed)
    save_grid(grid, out / "grid.txt")
    render_heatmap(grid, out / "grid.ppm")
    if not args.no_figures:
        figures.plot_matrix(grid, out / "grid.png", title=f"{args.pattern} {args.rows}x{args.cols}",
                            label="FSM")
    print(f"grid {args.rows}x{args.cols} pattern={args.pattern} seed={args.seed}")
    return {}


def cmd_tile(args, out: Path):
    if args.image:
        img = _load_image(Path(args.image))
    else:
        img = synth_raster(args.height, args.width, seed=args.seed)
    if args.resize:
        img = resize_bilinear(img, *args.resize)
    tiles = tile_image(img, args.grid_rows, args.grid_cols, args.tile_size, args.tile_size)
    up = np.stack([upsample_tile(t, args.upsample, args.upsample) for t in tiles.tiles])
    np.save(out / "tiles.npy", up)
    nch = up.shape[3] if up.ndim == 4 else 1
    header = "index row col " + " ".join(f"mean_ch{k}" for k in range(nch))
    lines = [header]
    for k, t in enumerate(up):
        i, j = divmod(k, tiles.grid_cols)
        means = t.reshape(-1, nch).mean(axis=0)
        lines.append(f"{k} {i} {j} " + " ".join(f"{m:.6f}" for m in means))
    (out / "tiles.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if not args.no_figures:
        means = up.reshape(len(up), -1).mean(axis=1).reshape(tiles.grid_rows, tiles.grid_cols)
        figures.plot_matrix(means, out / "tiles.png", title="mean intensity per tile", cmap="viridis")
    print(f"{len(tiles)} tiles of {args.tile_size}x{args.tile_size} from {img.shape[0]}x{img.shape[1]} "
          f"(offset {tiles.offset}), upsampled to {args.upsample}x{args.upsample}")
    return {"tiles": len(tiles), "offset": f"{tiles.offset[0]},{tiles.offset[1]}"}


def cmd_ucs(args, out: Path):
    grid = load_grid(args.grid)
    goal = args.goal if args.goal is not None else select_goal(grid)
    path = ucs(grid, args.start, goal, _cost(args.cost))
    save_path(path, out / "path.txt")
    render_heatmap(grid, out / "heatmap.ppm", path=path)
    if not args.no_figures:
        figures.plot_matrix(grid, out / "path.png", path=path, label="FSM",
                            title=f"UCS ({args.cost}) cost {path.total_cost:.4g}")
    print(f"path {tuple(args.start)} -> {tuple(goal)}: {len(path)} tiles, cost {path.total_cost!r}")
    return {"cost": repr(path.total_cost), "length": len(path)}


def cmd_mc(args, out: Path):
    grid = load_grid(args.grid)
    sigma2 = args.sigma2
    if sigma2 is None:
        sigma2 = estimate_global_variance(load_predictions(args.predictions))
    cfg = McConfig(args.iters, sigma2, args.seed, _cost(args.cost), args.start, args.goal_mode)
    probs = path_probability_matrix(grid, cfg)
    save_grid(probs, out / "probs.txt")
    render_heatmap(probs, out / "heatmap.ppm", vmin=0.0, vmax=1.0)
    mean_path = ucs(grid, cfg.fixed_start, select_goal(grid), cfg.cost)
    l1 = float(np.abs(probs - path_indicator(grid, mean_path.positions)).sum())
    if not args.no_figures:
        figures.plot_matrix(probs, out / "probs.png", overlay=mean_path.positions,
                            label="P(on path)", title=f"{args.iters} realizations, sigma2={sigma2:.3g}")
    print(f"sigma2={sigma2!r} iters={args.iters} sharpness={sharpness(probs)} l1_to_mean_path={l1:.6g}")
    return {"sigma2": repr(sigma2), "sharpness": sharpness(probs), "l1_to_mean_path": repr(l1)}


def cmd_vi(args, out: Path):
    grid = load_grid(args.grid)
    mdp = TaskingMdp.from_fsm(grid, _clouds(args), args.gamma, args.terminal_mode)
    res = value_iteration(mdp, args.tol, args.max_iters)
    save_policy(res.policy, out / "policy.txt")
    save_grid(res.values[:, :, 0], out / "values_clear.txt")
    save_grid(res.values[:, :, 1], out / "values_cloudy.txt")
    render_heatmap(res.values[:, :, 0], out / "values.ppm")
    if not args.no_figures:
        figures.plot_matrix(res.values[:, :, 0], out / "values.png", label="V(clear)",
                            title=f"value function, gamma={args.gamma}")
        figures.plot_residuals(res.residuals, out / "residuals.png", gamma=args.gamma)
    status = "converged" if res.converged else "NOT converged"
    print(f"value iteration {status} after {res.iterations} sweeps, residual {res.residual:.3g}, "
          f"terminal {tuple(mdp.terminal)}")
    return {"iterations": res.iterations, "converged": res.converged, "residual": repr(res.residual),
            "terminal": f"{mdp.terminal[0]},{mdp.terminal[1]}"}


def cmd_simulate(args, out: Path):
    grid = load_grid(args.grid)
    clouds = _clouds(args)
    mdp = TaskingMdp.from_fsm(grid, clouds, args.gamma, args.terminal_mode)
    if args.policy:
        policy = load_policy(args.policy)
        converged = "reused"
    else:
        res = value_iteration(mdp, args.tol, args.max_iters)
        policy, converged = res.policy, res.converged
    steps = args.steps or 4 * (grid.rows + grid.cols)
    p_init = None
    if args.band:
        r0, r1, c0, c1 = args.band
        p_init = np.full(grid.shape, clouds.p_init)
        p_init[r0:r1, c0:c1] = 1.0
    field = realize_clouds(clouds, grid.rows, grid.cols, steps, args.seed, p_init=p_init)
    traj = simulate_trajectory(mdp, policy, field, args.start, steps)
    clear_path = ucs(grid, args.start, select_goal(grid), CostModel.FSM_SUM)

    lines = [f"reward {traj.reward!r}", f"discounted {traj.discounted_reward!r}"]
    lines += [f"{s.pos[0]} {s.pos[1]} {s.cloud}" for s in traj.states]
    (out / "trajectory.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    save_cloud_field(field, out / "clouds.txt")
    save_path(clear_path, out / "ucs_path.txt")
    render_heatmap(mdp.grid, out / "heatmap.ppm", path=traj.positions)
    if not args.no_figures:
        figures.plot_clouds_over_grid(mdp.grid, field.mask, out / "trajectory.png", path=traj.positions,
                                      overlay=clear_path.positions,
                                      title="cloud-aware trajectory (solid) vs clear-sky UCS (dashed)")
    differs = traj.positions != clear_path.positions
    print(f"trajectory: {len(traj.states)} states, reward {traj.reward:.4g}, "
          f"reached terminal: {traj.reached_terminal}, differs from UCS: {differs}")
    return {"policy": converged, "length": len(traj.states), "reward": repr(traj.reward),
            "reached_terminal": traj.reached_terminal, "differs_from_ucs": differs}


def cmd_variance(args, out: Path):
    preds = load_predictions(args.predictions)
    sigma2 = estimate_global_variance(preds)
    (out / "variance.txt").write_text(f"images {len(preds)}\nsigma2 {sigma2!r}\n", encoding="utf-8")
    print(f"sigma2 {sigma2!r} over {len(preds)} images")
    return {"sigma2": repr(sigma2)}


def cmd_replay(args, out: Path):
    argv = replay_argv(read_meta(args.meta), out)
    code = run(argv)
    if code:
        raise TaskingError(f"replay of {args.meta} failed with exit code {code}")
    return None


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        extra = args.func(args, out)
        if extra is not None:
            _write_meta(out, args, extra)
    except (TaskingError, OSError, ValueError) as exc:
        print(f"fsmtask {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
