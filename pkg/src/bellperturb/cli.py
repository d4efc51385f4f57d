"""``bellperturb`` command-line driver.

Exit codes: 0 success, 2 usage or validation error, 3 I/O error,
4 a numerical check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import games, geometry222, perturb, qstrategy, scenario, subsetgames

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CHECK = 0, 2, 3, 4
EXPANSION_TS = (1e-2, 5e-3, 2.5e-3)
RATIO_BAND = (6.0, 10.0)
_MASK64 = (1 << 64) - 1


class UsageError(Exception):
    pass


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixer on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for work item ``index``: ``splitmix64(seed XOR index)``."""
    return np.random.default_rng(splitmix64((seed & _MASK64) ^ index))


@dataclass
class RunConfig:
    seed: int = 0
    trajectories: int = 20
    t_grid: list[float] = field(default_factory=lambda: list(np.linspace(-0.4, 0.4, 81)))
    fd_step: float = 1e-3
    output_dir: Path = Path(".")
    game: str = "chsh"

    def __post_init__(self):
        if self.trajectories < 1:
            raise UsageError("--trajectories must be >= 1")
        if not self.fd_step > 0:
            raise UsageError("--fd-step must be positive")
        if not self.t_grid:
            raise UsageError("t grid must be non-empty")


# -- loading ------------------------------------------------------------------------


@dataclass
class LoadedGame:
    name: str
    functional: scenario.BellFunctional
    reference: scenario.DeterministicStrategy
    quantum_value: Optional[float]


def load_game(game: Optional[str], functional: Optional[str]) -> LoadedGame:
    if functional:
        try:
            text = Path(functional).read_text()
        except OSError as exc:
            raise OSError(f"cannot read functional file {functional}: {exc}") from exc
        try:
            beta = scenario.functional_from_json(text)
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise UsageError(f"malformed functional file {functional}: {exc}") from exc
        ref = scenario.classical_max(beta).argmax[0]
        return LoadedGame(Path(functional).stem, beta, ref, None)
    name = game or "chsh"
    try:
        rec = games.get_game(name)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    return LoadedGame(rec.name, rec.functional, rec.reference_strategy, rec.quantum_value)


def parse_tables(text: str, sc: scenario.Scenario) -> scenario.DeterministicStrategy:
    """``"0,0;0,1"``: one comma-separated table per party, parties separated by ``;``."""
    try:
        tables = [[int(v) for v in part.split(",")] for part in text.split(";")]
        return scenario.DeterministicStrategy(sc, tables)
    except ValueError as exc:
        raise UsageError(f"bad strategy {text!r}: {exc}") from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _prepare_out(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    path.write_text(text)


# -- SVG ----------------------------------------------------------------------------


def svg_line_plot(
    series: Sequence[Sequence[tuple[float, float]]], reference: Optional[float], title: str, width=800, height=500
) -> str:
    """Polyline chart with an optional dashed horizontal reference line."""
    xs = [x for s in series for x, _ in s]
    ys = [y for s in series for _, y in s] + ([reference] if reference is not None else [])
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0 or 1) * pw

    def py(y):
        return top + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        out.append(
            f'<text x="{px(xv):.1f}" y="{top + ph + 18}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{xv:.3g}</text>'
        )
        out.append(
            f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" text-anchor="end" font-family="sans-serif" '
            f'font-size="11">{yv:.4g}</text>'
        )
    out.append(
        f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" '
        'font-size="12">t</text>'
    )
    palette = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]
    for k, s in enumerate(series):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in s)
        out.append(f'<polyline fill="none" stroke="{palette[k % len(palette)]}" stroke-width="1" points="{pts}"/>')
    if reference is not None:
        out.append(
            f'<line x1="{left}" y1="{py(reference):.2f}" x2="{left + pw}" y2="{py(reference):.2f}" '
            'stroke="red" stroke-dasharray="6,4" stroke-width="1.5"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- commands -----------------------------------------------------------------------


def cmd_game_info(args) -> int:
    g = load_game(args.game, args.functional)
    cm = scenario.classical_max(g.functional)
    sc = g.functional.scenario
    info = {
        "name": g.name,
        "scenario": sc.to_dict(),
        "classical_value": cm.value,
        "classical_maximizers": len(cm.argmax),
        "quantum_value": g.quantum_value,
        "reference_strategy": [list(t) for t in g.reference.tables],
        "reference_score": scenario.score(g.functional, g.reference),
    }
    if args.json:
        print(json.dumps(info, indent=2))
    else:
        print(f"game            {g.name}")
        print(f"scenario        n={sc.n} m={sc.m} d={sc.d}")
        print(f"classical value {cm.value:.12g} ({len(cm.argmax)} maximizers)")
        qv = "unknown" if g.quantum_value is None else f"{g.quantum_value:.12g}"
        print(f"quantum value   {qv}")
        print(f"reference       {info['reference_strategy']} scoring {info['reference_score']:.12g}")
    return EXIT_OK


def run_perturb(cfg: RunConfig, g: LoadedGame, dim: int) -> dict:
    """Trajectories and curvatures at canonical realizations of the reference strategy."""
    beta = g.functional
    two_inputs = beta.scenario.m == 2
    rows, curv, series = [], [], []
    for k in range(cfg.trajectories):
        rng = stream(cfg.seed, k)
        strat = qstrategy.canonical_det_strategy(g.reference, dim, rng)
        gens = perturb.sample_generators(strat, rng)
        traj = perturb.score_trajectory(beta, strat, gens, cfg.t_grid)
        terms = perturb.second_order_terms(beta, strat, gens) if two_inputs else None
        for t, s in traj:
            rows.append((k, t, s, terms.at(t) if terms else None))
        series.append(traj)
        curv.append((k, perturb.fd_second_derivative(beta, strat, gens, cfg.fd_step)))
    return {"rows": rows, "curvatures": curv, "series": series, "classical": scenario.score(beta, g.reference)}


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def cmd_perturb(args) -> int:
    g = load_game(args.game, args.functional)
    cfg = RunConfig(
        seed=args.seed,
        trajectories=args.trajectories,
        t_grid=list(np.linspace(args.t_min, args.t_max, args.t_points)) if args.t_points > 0 else [],
        fd_step=args.fd_step,
        output_dir=Path(args.out or "bellperturb-out"),
        game=g.name,
    )
    dim = args.dim or g.functional.scenario.d
    res = run_perturb(cfg, g, dim)
    out = _prepare_out(cfg.output_dir)
    _write(out / "trajectories.csv", _csv_text(["trajectory", "t", "score", "prediction"], res["rows"]))
    _write(out / "curvature.csv", _csv_text(["trajectory", "fd_second_derivative"], res["curvatures"]))
    _write(out / "trajectories.svg", svg_line_plot(res["series"], res["classical"], f"{g.name}: score along unitary orbits"))
    vals = [c for _, c in res["curvatures"]]
    print(f"{g.name}: {len(vals)} trajectories, fd second derivative max {max(vals):.6g}, mean {np.mean(vals):.6g}")
    print(f"all negative: {all(v < 0 for v in vals)}; files written to {out}")
    return EXIT_OK


def expansion_ratios(beta, strat, gens, ts=EXPANSION_TS) -> list[float]:
    terms = perturb.second_order_terms(beta, strat, gens)
    flow = perturb.OrbitFlow(gens)
    errs = [abs(perturb.strategy_score(beta, flow.apply(strat, t)) - terms.at(t)) for t in ts]
    return [errs[i] / errs[i + 1] if errs[i + 1] > 0 else math.inf for i in range(len(errs) - 1)]


def cmd_check_expansion(args) -> int:
    g = load_game(args.game, args.functional)
    beta = g.functional
    if beta.scenario.m != 2:
        print(
            f"error: the second-order expansion is only available for two inputs per party (m = 2); "
            f"{g.name} has m = {beta.scenario.m}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    if args.trajectories < 1:
        raise UsageError("--trajectories must be >= 1")
    dim = args.dim or beta.scenario.d
    print("start      pair  ratio(1e-2/5e-3)  ratio(5e-3/2.5e-3)")
    good = total = 0
    for kind in ("deterministic", "random"):
        for k in range(args.trajectories):
            rng = stream(args.seed, k + (0 if kind == "deterministic" else 1 << 32))
            if kind == "deterministic":
                strat = qstrategy.canonical_det_strategy(g.reference, dim, rng)
            else:
                strat = qstrategy.random_pure_strategy(beta.scenario, dim, rng)
            gens = perturb.sample_generators(strat, rng)
            r = expansion_ratios(beta, strat, gens)
            ok = all(RATIO_BAND[0] <= v <= RATIO_BAND[1] for v in r)
            good += ok
            total += 1
            print(f"{kind:13s} {k:3d}  {r[0]:16.4f}  {r[1]:18.4f}  {'ok' if ok else 'FAIL'}")
    frac = good / total
    passed = frac >= 0.95
    print(f"{good}/{total} pairs inside [{RATIO_BAND[0]:g}, {RATIO_BAND[1]:g}]: {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_CHECK


def cmd_subset(args) -> int:
    g = load_game(args.game, args.functional)
    beta = g.functional
    if beta.scenario.m != 2:
        print(f"error: subset games need two inputs per party (m = 2); {g.name} has m = {beta.scenario.m}", file=sys.stderr)
        return EXIT_USAGE
    det = parse_tables(args.strategy, beta.scenario) if args.strategy else g.reference
    if args.tilt:
        beta = scenario.tilt(beta, det, args.tilt)
    dim = args.dim or beta.scenario.d
    rng = stream(args.seed, 0)
    report = subsetgames.local_optimality_probe(beta, det, dim, args.samples, rng)
    out = report.to_dict()
    strat = qstrategy.canonical_det_strategy(det, dim, stream(args.seed, 1), per_input=True)
    out["decomposition_residual"] = subsetgames.decompose_b2(beta, strat, det).residual
    if beta.scenario.d == 2:
        out["scalar_subset_values"] = {
            ",".join(map(str, s)): subsetgames.n22_subset_scalar(beta, det, s)
            for s in subsetgames.eligible_subsets(beta.scenario.n)
        }
    text = json.dumps(out, indent=2)
    if args.out:
        _write(_prepare_out(Path(args.out)) / "subset_report.json", text + "\n")
    print(text)
    return EXIT_OK


def cmd_geometry(args) -> int:
    if args.geometry_command == "sequence":
        thetas = _floats(args.thetas)
        if not thetas:
            raise UsageError("--thetas must list at least one angle")
        rows, dists, worst = [], [], 0.0
        for th in thetas:
            sp = geometry222.extremal_sequence(th)
            rows.append((th, sp.distance, sp.extremality.max_residual))
            dists.append(sp.distance)
            worst = max(worst, sp.extremality.max_residual)
        text = _csv_text(["theta", "distance", "extremality_residual_max"], rows)
        if args.out:
            _write(_prepare_out(Path(args.out)) / "sequence.csv", text)
        print(text, end="")
        order = np.argsort(thetas)[::-1]
        monotone = all(dists[order[i + 1]] < dists[order[i]] for i in range(len(order) - 1))
        ok = monotone and worst <= geometry222.EXTREMALITY_TOL
        print(f"distance strictly decreasing with theta: {monotone}; max residual {worst:.3e}", file=sys.stderr)
        return EXIT_OK if ok else EXIT_CHECK
    report = geometry222.hull_demo(args.max_n)
    text = report.to_json()
    if args.out:
        _write(_prepare_out(Path(args.out)) / "hull.json", text + "\n")
    print(text)
    return EXIT_OK if report.ok else EXIT_CHECK


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--game", help=f"catalog id ({', '.join(games.GAMES)})")
    src.add_argument("--functional", metavar="FILE", help="functional JSON file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, metavar="DIR")

    p = argparse.ArgumentParser(prog="bellperturb", description="Unitary perturbations of Bell strategies.")
    sub = p.add_subparsers(dest="command", required=True)

    gi = sub.add_parser("game-info", parents=[common], help="catalog entry and recomputed classical value")
    gi.add_argument("game_id", nargs="?", help="catalog id (same as --game)")
    gi.add_argument("--json", action="store_true")
    gi.set_defaults(func=cmd_game_info)

    pt = sub.add_parser("perturb", parents=[common], help="score trajectories at deterministic realizations")
    pt.add_argument("--trajectories", type=int, default=20)
    pt.add_argument("--fd-step", type=float, default=1e-3)
    pt.add_argument("--dim", type=int, default=None, help="local dimension (default d)")
    pt.add_argument("--t-min", type=float, default=-0.4)
    pt.add_argument("--t-max", type=float, default=0.4)
    pt.add_argument("--t-points", type=int, default=81)
    pt.set_defaults(func=cmd_perturb)

    ce = sub.add_parser("check-expansion", parents=[common], help="third-order scaling of the expansion error")
    ce.add_argument("--trajectories", type=int, default=20)
    ce.add_argument("--dim", type=int, default=None)
    ce.set_defaults(func=cmd_check_expansion)

    sg = sub.add_parser("subset", parents=[common], help="subset-game local optimality probe")
    sg.add_argument("--strategy", help='deterministic tables, e.g. "0,0;0,0" (default: reference)')
    sg.add_argument("--samples", type=int, default=20)
    sg.add_argument("--dim", type=int, default=None)
    sg.add_argument("--tilt", type=float, default=0.0, help="add eps times the indicator of the strategy")
    sg.set_defaults(func=cmd_subset)

    ge = sub.add_parser("geometry", help="(2,2,2) extremal sequence and 3D hull demo")
    gsub = ge.add_subparsers(dest="geometry_command", required=True)
    seq = gsub.add_parser("sequence", parents=[common])
    seq.add_argument("--thetas", default="0.2,0.1,0.05")
    seq.set_defaults(func=cmd_geometry)
    hull = gsub.add_parser("hull", parents=[common])
    hull.add_argument("--max-n", type=int, default=6)
    hull.set_defaults(func=cmd_geometry)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "game_id", None):
        if args.game or args.functional:
            parser.error("give the game either positionally or with --game/--functional")
        args.game = args.game_id
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
