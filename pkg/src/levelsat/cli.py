"""Command-line front end.

Commands:
  build     build a chain from a config; writes the chain file and an audit
            log, prints a summary
  schedule  print the first entries of the config's schedule
  dim       trends and comparator verdicts for the config's comparisons
            against a built chain; writes CSVs, SVG plots, and a JSON report
  divide    dividing experiments from the config: certificates plus the
            dimension-drop survey; writes a JSON report and trend CSVs
  export    re-export a chain file: final structure JSON and a stage table

Configs are YAML: plugin, stages, schedule (fair or seeded), horizon,
comparator {window, bound}, named sets, comparisons, dividing experiments.
Parameter bindings take element ids or the anchor "first_at_level <level>",
resolved against the final stage.

Exit codes: 0 success; 1 a condition demanded by --expect failed; 2 config
or usage error; 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from .construction import (
    InternalFaultError,
    StageChain,
    build_chain,
    load_chain,
    serialize_chain,
)
from .dimension import dim_compare, export_trend_csv, trend
from .dividing import certify_dividing, find_dimension_drop
from .evaluator import DefinableSet
from .formula import (
    Formula,
    LevelOrdinal,
    ParseError,
    ScheduleEntry,
    enumerate_schedule,
    free_vars,
    parse,
    parse_level,
    seeded_schedule,
    var_sort_key,
)
from .plots import trend_plot_svg
from .structures import FinStructure, canonical_json
from .theory import PLUGINS, get_plugin


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SetSpec:
    name: str
    formula: Formula
    vars: tuple[str, ...]
    params: tuple[tuple[str, object], ...]  # var -> id or anchor text
    cap: Optional[LevelOrdinal]


@dataclass(frozen=True)
class DivideSpec:
    name: str
    phi: Formula
    psi: str
    a_raw: tuple[object, ...]
    b_raw: tuple[object, ...]
    k: int
    L: int


@dataclass(frozen=True)
class Config:
    plugin: str
    stages: int
    schedule_kind: str
    horizon: int
    budget: Optional[int]
    window: int
    bound: float
    sets: dict[str, SetSpec]
    comparisons: tuple[tuple[str, str], ...]
    dividing: tuple[DivideSpec, ...]


def _parse_cap(raw) -> Optional[LevelOrdinal]:
    if raw is None:
        return None
    try:
        return parse_level(str(raw))
    except ValueError as e:
        raise ConfigError(str(e))


def load_config(path: str) -> Config:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"bad YAML: {e}")
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    name = doc.get("plugin")
    if name not in PLUGINS:
        raise ConfigError(
            f"unknown plugin {name!r}; available: {', '.join(sorted(PLUGINS))}"
        )
    sig = get_plugin(name).signature
    stages = doc.get("stages", 0)
    if not isinstance(stages, int) or stages < 0:
        raise ConfigError("stages must be a nonnegative integer")
    kind = doc.get("schedule", "seeded")
    if kind not in ("seeded", "fair"):
        raise ConfigError("schedule must be 'seeded' or 'fair'")
    horizon = doc.get("horizon", 4)
    if not isinstance(horizon, int) or horizon < 1:
        raise ConfigError("horizon must be a positive integer")
    budget = doc.get("budget")
    if budget is not None and (not isinstance(budget, int) or budget < 0):
        raise ConfigError("budget must be a nonnegative integer")
    comp = doc.get("comparator") or {}
    window = comp.get("window", 10)
    bound = comp.get("bound", 2.0)
    if not isinstance(window, int) or window < 2:
        raise ConfigError("comparator window must be an integer >= 2")
    if not isinstance(bound, (int, float)) or bound <= 0:
        raise ConfigError("comparator bound must be positive")

    def parse_formula(text) -> Formula:
        if not isinstance(text, str):
            raise ConfigError(f"formula must be text, got {text!r}")
        try:
            return parse(text, sig)
        except ParseError as e:
            raise ConfigError(f"bad formula {text!r}: {e}")

    sets: dict[str, SetSpec] = {}
    for sname, spec in (doc.get("sets") or {}).items():
        if not isinstance(spec, dict):
            raise ConfigError(f"set {sname!r} must be a mapping")
        f = parse_formula(spec.get("formula"))
        params_raw = spec.get("params") or {}
        if not isinstance(params_raw, dict):
            raise ConfigError(f"set {sname!r}: params must be a mapping")
        split = spec.get("split")
        if split is None:
            split = [
                v
                for v in sorted(free_vars(f), key=var_sort_key)
                if v.startswith("x") and v not in params_raw
            ]
        free = free_vars(f)
        for v in list(split) + list(params_raw):
            if v not in free:
                raise ConfigError(f"set {sname!r}: {v!r} is not free in the formula")
        leftover = free - set(split) - set(params_raw)
        if leftover:
            raise ConfigError(f"set {sname!r}: unbound variables {sorted(leftover)}")
        sets[sname] = SetSpec(
            sname,
            f,
            tuple(split),
            tuple(sorted(params_raw.items())),
            _parse_cap(spec.get("cap")),
        )

    comparisons = []
    for row in doc.get("comparisons") or []:
        if not (isinstance(row, list) and len(row) == 2):
            raise ConfigError("each comparison must be a [left, right] pair")
        for side in row:
            if side not in sets:
                raise ConfigError(f"comparison references unknown set {side!r}")
        comparisons.append((row[0], row[1]))

    dividing = []
    for i, spec in enumerate(doc.get("dividing") or []):
        if not isinstance(spec, dict):
            raise ConfigError("each dividing experiment must be a mapping")
        dname = spec.get("name", f"experiment{i}")
        psi = spec.get("psi")
        if psi not in sets:
            raise ConfigError(f"dividing {dname!r}: unknown psi set {psi!r}")
        k = spec.get("k", 2)
        L = spec.get("L", 3)
        if not (isinstance(k, int) and isinstance(L, int) and 1 <= k <= L):
            raise ConfigError(f"dividing {dname!r}: need integers 1 <= k <= L")
        dividing.append(
            DivideSpec(
                dname,
                parse_formula(spec.get("phi")),
                psi,
                tuple(spec.get("a") or []),
                tuple(spec.get("b") or []),
                k,
                L,
            )
        )

    return Config(
        name, stages, kind, horizon, budget, window, float(bound),
        sets, tuple(comparisons), tuple(dividing),
    )


def resolve_anchor(M: FinStructure, raw) -> int:
    """Element binding: a plain id, or "first_at_level <level>" for the
    least id sitting at exactly that level."""
    if isinstance(raw, int):
        if raw not in set(M.universe):
            raise ConfigError(f"element id {raw} not in the structure")
        return raw
    if isinstance(raw, str):
        parts = raw.split()
        if len(parts) == 2 and parts[0] == "first_at_level":
            lvl = _parse_cap(parts[1])
            ids = [e for e in M.universe if M.level_of(e) == lvl]
            if not ids:
                raise ConfigError(f"no element at level {parts[1]}")
            return min(ids)
    raise ConfigError(f"bad element binding {raw!r}")


def build_set(spec: SetSpec, M: FinStructure) -> DefinableSet:
    params = tuple((v, resolve_anchor(M, raw)) for v, raw in spec.params)
    return DefinableSet(spec.formula, spec.vars, params, spec.cap)


def _schedule_for(cfg: Config, count: int) -> tuple[ScheduleEntry, ...]:
    plugin = get_plugin(cfg.plugin)
    if cfg.schedule_kind == "fair":
        return tuple(enumerate_schedule(plugin.signature, count))
    return tuple(seeded_schedule(plugin.signature, plugin.seeds(), count, cfg.horizon))


def _level_histogram(M: FinStructure) -> str:
    counts: dict[LevelOrdinal, int] = {}
    for e in M.universe:
        lv = M.level_of(e)
        counts[lv] = counts.get(lv, 0) + 1
    return " ".join(f"{lv.render()}:{n}" for lv, n in sorted(counts.items()))


def _audit_text(chain: StageChain) -> str:
    lines = []
    for audit in chain.audits:
        for ea in audit.entries:
            cases = {1: 0, 2: 0, 3: 0}
            for rec in ea.records:
                cases[rec.case] += 1
            lines.append(
                f"stage {audit.stage} pos {ea.position} level {ea.level.render()} "
                f"|V|={len(ea.v_before)} skipped={ea.skipped} "
                f"internal={cases[1]} oracle={cases[2]} unrealizable={cases[3]}"
            )
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}")


def cmd_build(cfg: Config, out_dir: Path, stages: Optional[int]) -> int:
    n = cfg.stages if stages is None else stages
    count = max(n, cfg.budget or 0)
    chain = build_chain(get_plugin(cfg.plugin), n, schedule=_schedule_for(cfg, count))
    final = chain.final
    print(
        f"plugin {cfg.plugin}, {n} stages, schedule {cfg.schedule_kind} "
        f"(horizon {cfg.horizon})"
    )
    print(f"final size {final.size()}; levels {_level_histogram(final)}")
    _write(out_dir / f"{cfg.plugin}.chain.json", serialize_chain(chain))
    _write(out_dir / f"{cfg.plugin}.audit.txt", _audit_text(chain))
    return 0


def cmd_schedule(cfg: Config, count: Optional[int]) -> int:
    n = count if count is not None else (cfg.budget or 20)
    for e in _schedule_for(cfg, n)[:n]:
        print(
            f"{e.position:4d}  {e.level.render():<8} "
            f"x={','.join(e.x_vars) or '-'} y={','.join(e.y_vars) or '-'}  {e.formula}"
        )
    return 0


def _load_chain_file(path: str) -> StageChain:
    try:
        return load_chain(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read chain: {e}")
    except (KeyError, ValueError) as e:
        raise ConfigError(f"bad chain file: {e}")


def cmd_dim(
    cfg: Config, chain: StageChain, window: int, bound: float, out_dir: Path,
    expect: list[str],
) -> int:
    if chain.plugin_name != cfg.plugin:
        raise ConfigError(
            f"chain was built for {chain.plugin_name!r}, config says {cfg.plugin!r}"
        )
    final = chain.final
    report = {"window": window, "bound": bound, "comparisons": []}
    verdicts = []
    for left, right in cfg.comparisons:
        t1 = trend(chain, build_set(cfg.sets[left], final), label=left)
        t2 = trend(chain, build_set(cfg.sets[right], final), label=right)
        res = dim_compare(t1, t2, window, bound)
        verdicts.append(res.verdict)
        print(f"{left} vs {right}: {res.verdict} ({res.evidence})")
        csv1 = out_dir / f"{left}.csv"
        csv2 = out_dir / f"{right}.csv"
        plot = out_dir / f"{left}_vs_{right}.svg"
        _write(csv1, export_trend_csv(t1))
        _write(csv2, export_trend_csv(t2))
        _write(
            plot,
            trend_plot_svg(
                [t1, t2], window=window,
                caption=f"{left} vs {right}: {res.verdict}",
            ),
        )
        report["comparisons"].append(
            {
                "left": left,
                "right": right,
                "verdict": res.verdict,
                "evidence": res.evidence,
                "window_start": res.window_start,
                "window_end": res.window_end,
                "ds": [d if d is not None else "-inf-side" for d in res.ds],
                "csv": [csv1.name, csv2.name],
                "plot": plot.name,
            }
        )
    _write(out_dir / "dim_report.json", canonical_json(report) + "\n")
    return _check_expect(expect, verdicts=verdicts)


def cmd_divide(
    cfg: Config,
    chain: StageChain,
    window: int,
    bound: float,
    seed: int,
    out_dir: Path,
    expect: list[str],
) -> int:
    if chain.plugin_name != cfg.plugin:
        raise ConfigError(
            f"chain was built for {chain.plugin_name!r}, config says {cfg.plugin!r}"
        )
    plugin = get_plugin(cfg.plugin)
    final = chain.final
    report = {"window": window, "bound": bound, "seed": seed, "experiments": []}
    certified_all, dropped_all = True, True
    for spec in cfg.dividing:
        a_ids = tuple(resolve_anchor(final, r) for r in spec.a_raw)
        b_ids = tuple(resolve_anchor(final, r) for r in spec.b_raw)
        psi = build_set(cfg.sets[spec.psi], final)
        witness = certify_dividing(
            plugin, chain, spec.phi, a_ids, b_ids, spec.k, spec.L, seed=seed
        )
        drop = find_dimension_drop(
            chain, psi, spec.phi, a_ids, b_ids, window=window, bound=bound, seed=seed
        )
        certified_all &= witness is not None
        dropped_all &= drop.any_diverges_neg
        psi_csv = out_dir / f"{spec.name}.psi.csv"
        phi_csv = out_dir / f"{spec.name}.phi.csv"
        _write(psi_csv, export_trend_csv(trend(chain, psi, label=spec.psi)))
        base = DefinableSet(
            spec.phi,
            psi.vars,
            tuple(zip(_rest_vars(spec.phi), a_ids))
            + tuple(zip(_inst_vars(spec.phi), b_ids)),
            psi.cap,
        )
        _write(phi_csv, export_trend_csv(trend(chain, base)))
        best = drop.best
        entry = {
            "name": spec.name,
            "phi": str(spec.phi),
            "psi": spec.psi,
            "a": list(a_ids),
            "b": list(b_ids),
            "k": spec.k,
            "L": spec.L,
            "certified": witness is not None,
            "certificate": None
            if witness is None
            else {
                "instances": [list(t) for t in witness.instances],
                "confirmed_subsets": [list(t) for t in witness.confirmations],
                "types_equal": list(witness.type_confirmations),
                "grown": witness.grown,
            },
            "candidates": drop.candidates_total,
            "skipped_late": [list(t) for t in drop.skipped_late],
            "n_diverges_neg": len(drop.diverging),
            "verdicts": [
                {
                    "instance": list(e.instance),
                    "verdict": e.result.verdict,
                    "d_final": e.result.d_final,
                }
                for e in drop.entries
            ],
            "best": None
            if best is None
            else {
                "instance": list(best.instance),
                "verdict": best.result.verdict,
                "evidence": best.result.evidence,
                "ds": [d if d is not None else "-inf-side" for d in best.result.ds],
            },
            "csv": [psi_csv.name, phi_csv.name],
        }
        report["experiments"].append(entry)
        cert_note = "certified" if witness is not None else "no certificate"
        print(
            f"{spec.name}: {cert_note} (k={spec.k}, L={spec.L}); "
            f"{drop.candidates_total} candidates, "
            f"{len(drop.diverging)} DivergesNeg, {len(drop.skipped_late)} late"
        )
        if best is not None:
            print(f"  best: instance {list(best.instance)} {best.result.evidence}")
    _write(out_dir / "divide_report.json", canonical_json(report) + "\n")
    return _check_expect(
        expect, certified=certified_all if cfg.dividing else None,
        dropped=dropped_all if cfg.dividing else None,
    )


def _rest_vars(phi: Formula) -> tuple[str, ...]:
    return tuple(
        v
        for v in sorted(free_vars(phi), key=var_sort_key)
        if not v.startswith("x") and not v.startswith("y")
    )


def _inst_vars(phi: Formula) -> tuple[str, ...]:
    return tuple(
        v for v in sorted(free_vars(phi), key=var_sort_key) if v.startswith("y")
    )


def _check_expect(
    expect: list[str],
    verdicts: Optional[list[str]] = None,
    certified: Optional[bool] = None,
    dropped: Optional[bool] = None,
) -> int:
    failed = []
    for token in expect:
        if token == "certified":
            ok = bool(certified)
        elif token == "not-certified":
            ok = certified is False
        elif token == "drop":
            ok = bool(dropped)
        elif token.startswith("verdict="):
            want = token.split("=", 1)[1]
            ok = verdicts is not None and all(v == want for v in verdicts)
        elif token.startswith("any-verdict="):
            want = token.split("=", 1)[1]
            ok = verdicts is not None and want in verdicts
        else:
            raise ConfigError(f"unknown --expect token {token!r}")
        if not ok:
            failed.append(token)
    if failed:
        print(f"expectation failed: {', '.join(failed)}")
        return 1
    return 0


def cmd_export(chain: StageChain, stem: str, out_dir: Path) -> int:
    _write(out_dir / f"{stem}.final.json", chain.final.to_json() + "\n")
    rows = ["stage,size,levels"]
    for n, M in enumerate(chain.stages):
        rows.append(f"{n},{M.size()},{_level_histogram(M)}")
    _write(out_dir / f"{stem}.stages.csv", "\n".join(rows) + "\n")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    ap = argparse.ArgumentParser(
        prog="levelsat",
        description="staged level structures: build chains, compare trends, "
        "run dividing experiments",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True, chain=False):
        if config:
            p.add_argument("--config", required=True, help="YAML experiment config")
        if chain:
            p.add_argument("--chain", required=True, help="chain file from build")
        p.add_argument("--out-dir", default=".", help="directory for outputs")

    p_build = sub.add_parser("build", help="build and serialize a chain")
    common(p_build)
    p_build.add_argument("--stages", type=int, help="override the config's stage count")

    p_sched = sub.add_parser("schedule", help="print schedule entries")
    p_sched.add_argument("--config", required=True)
    p_sched.add_argument("--count", type=int, help="how many entries (default 20)")

    p_dim = sub.add_parser("dim", help="trend comparisons against a chain")
    common(p_dim, chain=True)
    p_dim.add_argument("--window", type=int, help="override comparator window")
    p_dim.add_argument("--bound", type=float, help="override comparator bound")
    p_dim.add_argument("--expect", action="append", default=[],
                       help="verdict=<V> or any-verdict=<V>; exit 1 if unmet")

    p_div = sub.add_parser("divide", help="dividing experiments against a chain")
    common(p_div, chain=True)
    p_div.add_argument("--window", type=int)
    p_div.add_argument("--bound", type=float)
    p_div.add_argument("--seed", type=int, default=0,
                       help="seed for candidate subsampling")
    p_div.add_argument("--expect", action="append", default=[],
                       help="certified, not-certified, or drop; exit 1 if unmet")

    p_exp = sub.add_parser("export", help="re-export a chain file")
    p_exp.add_argument("--chain", required=True)
    p_exp.add_argument("--out-dir", default=".")

    args = ap.parse_args(argv)
    try:
        if args.command == "build":
            cfg = load_config(args.config)
            return cmd_build(cfg, Path(args.out_dir), args.stages)
        if args.command == "schedule":
            cfg = load_config(args.config)
            return cmd_schedule(cfg, args.count)
        if args.command == "dim":
            cfg = load_config(args.config)
            chain = _load_chain_file(args.chain)
            return cmd_dim(
                cfg, chain,
                args.window if args.window is not None else cfg.window,
                args.bound if args.bound is not None else cfg.bound,
                Path(args.out_dir), args.expect,
            )
        if args.command == "divide":
            cfg = load_config(args.config)
            chain = _load_chain_file(args.chain)
            return cmd_divide(
                cfg, chain,
                args.window if args.window is not None else cfg.window,
                args.bound if args.bound is not None else cfg.bound,
                args.seed, Path(args.out_dir), args.expect,
            )
        if args.command == "export":
            chain = _load_chain_file(args.chain)
            stem = Path(args.chain).name.split(".")[0]
            return cmd_export(chain, stem, Path(args.out_dir))
        raise ConfigError(f"unknown command {args.command!r}")
    except InternalFaultError as e:
        print(f"internal invariant violation: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        # ConfigError, ParseError, OracleError, and the structure errors all
        # land here: bad input, not a bug
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
