"""Instance files, command dispatch, and structured reports.

Instances are JSON with a versioned schema; every group, endomorphism and
subgroup in the file is validated eagerly at parse time.  Reports carry
exact integers and rationals only; the single float rendering lives in an
"approx" string field.  JSON output is canonical (sorted keys, fixed
separators), so identical instances produce byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from . import depth as depth_mod
from . import discrete, duality, profinite
from .errors import (
    HypothesisFailure,
    Inconclusive,
    InversionFailure,
    ValidationError,
)
from .finabel import FiniteAbelianGroup
from .gengroup import cayley_group
from .values import CheckRecord, EntropyValue, StabilizationPolicy

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INCONCLUSIVE = 2
EXIT_VALIDATION = 3
EXIT_HYPOTHESIS = 4


@dataclass
class Instance:
    kind: str
    policy: StabilizationPolicy
    raw: dict
    group: object
    endo: object
    family: list
    cylinders: list


def _block_from_spec(spec):
    if isinstance(spec, dict) and "cayley" in spec:
        return cayley_group(spec["cayley"])
    if isinstance(spec, list):
        return FiniteAbelianGroup(tuple(int(d) for d in spec))
    raise ValidationError(f"bad block spec {spec!r}")


def _block_to_spec(block):
    if isinstance(block, FiniteAbelianGroup):
        return [int(d) for d in block.moduli]
    return {"cayley": [list(r) for r in block.table]}


def _parse_element(spec, abelian: bool) -> dict:
    out = {}
    for item in spec:
        idx, val = int(item[0]), item[1]
        out[idx] = tuple(int(x) for x in val) if abelian else int(val)
    return out


def _element_to_spec(elem: dict, abelian: bool):
    return [
        [i, list(v) if abelian else int(v)]
        for i, v in sorted(elem.items())
    ]


def _parse_policy(spec: dict | None) -> StabilizationPolicy:
    spec = spec or {}
    return StabilizationPolicy(
        max_n=int(spec.get("max_n", 64)),
        stall_window=int(spec.get("stall_window", 3)),
        window_budget=int(spec.get("window_budget", 32)),
    )


def _policy_to_spec(p: StabilizationPolicy) -> dict:
    return {
        "max_n": p.max_n,
        "stall_window": p.stall_window,
        "window_budget": p.window_budget,
    }


def _parse_discrete_group(gspec: dict) -> discrete.LFGroup:
    blocks = gspec["blocks"]
    prefix = [_block_from_spec(b) for b in blocks.get("prefix", [])]
    period = [_block_from_spec(b) for b in blocks["types"]]
    if int(blocks.get("period", len(period))) != len(period):
        raise ValidationError("blocks.period must equal the number of types")
    return discrete.locally_finite_group(prefix, period)


def _parse_pro_group(gspec: dict) -> profinite.ProGroup:
    blocks = gspec["blocks"]
    prefix = [_block_from_spec(b) for b in blocks.get("prefix", [])]
    period = [_block_from_spec(b) for b in blocks["types"]]
    if int(blocks.get("period", len(period))) != len(period):
        raise ValidationError("blocks.period must equal the number of types")
    for b in prefix + period:
        if not isinstance(b, FiniteAbelianGroup):
            raise ValidationError("profinite blocks must be abelian")
    return profinite.pro_group(prefix, period, gspec.get("index_set", "N"))


def _parse_banded_endo(group: discrete.LFGroup, espec: dict) -> discrete.BandedEndo:
    images = []
    for res in espec["images"]:
        res_images = []
        for gen_terms in res:
            terms = []
            for term in gen_terms:
                o, val = term
                if group.is_abelian:
                    terms.append((int(o), tuple(int(x) for x in val)))
                else:
                    terms.append((int(o), int(val)))
            res_images.append(terms)
        images.append(res_images)
    return discrete.banded_endo(
        group, int(espec["offset"]), int(espec["width"]),
        int(espec.get("period", len(images))), images,
    )


def _parse_rowfinite_endo(group: profinite.ProGroup, espec: dict) -> profinite.RowFiniteEndo:
    def parse_rows(rows_spec):
        rows = []
        for res in rows_spec:
            terms = []
            for term in res:
                o, mat = term
                terms.append((int(o), [[int(x) for x in r] for r in mat]))
            rows.append(terms)
        return rows

    rows = parse_rows(espec["rows"])
    prefix_rows = parse_rows(espec.get("prefix_rows", []))
    return profinite.rowfinite_endo(
        group, int(espec["offset"]), int(espec["width"]),
        int(espec.get("period", len(rows))), rows, prefix_rows,
    )


def _parse_cylinder(group: profinite.ProGroup, spec: dict) -> profinite.CylinderSubgroup:
    if "window_indices" in spec:
        idx = [int(i) for i in spec["window_indices"]]
    else:
        window = spec.get("window", [])
        if len(window) not in (0, 2):
            raise ValidationError("window must be a [lo, hi) pair or window_indices a list")
        idx = list(range(int(window[0]), int(window[1]))) if window else []
    return profinite.cylinder(group, idx, [list(g) for g in spec.get("core_gens", [])])


def parse_instance(path: str) -> Instance:
    """Load and eagerly validate an instance file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return instance_from_dict(raw)


def instance_from_dict(raw: dict) -> Instance:
    if raw.get("schema") != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema {raw.get('schema')!r}")
    kind = raw.get("kind")
    if kind not in ("discrete", "profinite", "bridge", "depth"):
        raise ValidationError(f"unknown kind {kind!r}")
    policy = _parse_policy(raw.get("policy"))
    family: list = []
    cylinders: list = []
    if kind in ("discrete", "bridge"):
        group = _parse_discrete_group(raw["group"])
        endo = _parse_banded_endo(group, raw["endo"])
        for fspec in raw.get("family", []):
            gens = [_parse_element(g, group.is_abelian) for g in fspec["gens"]]
            family.append(gens)
        if kind == "bridge" and not group.is_abelian:
            raise ValidationError("bridge instances must be abelian")
    else:
        group = _parse_pro_group(raw["group"])
        endo = _parse_rowfinite_endo(group, raw["endo"])
        for cspec in raw.get("cylinders", []):
            cylinders.append(_parse_cylinder(group, cspec))
        if kind == "depth" and group.index_set != "Z":
            raise ValidationError("depth instances need a Z-indexed group")
    return Instance(kind, policy, _normalize_raw(raw), group, endo, family, cylinders)


def _normalize_raw(raw: dict) -> dict:
    out = {
        "schema": SCHEMA_VERSION,
        "kind": raw["kind"],
        "group": {
            "index_set": raw["group"].get("index_set", "N"),
            "blocks": {
                "period": int(raw["group"]["blocks"].get(
                    "period", len(raw["group"]["blocks"]["types"])
                )),
                "types": raw["group"]["blocks"]["types"],
                "prefix": raw["group"]["blocks"].get("prefix", []),
            },
        },
        "endo": raw["endo"],
        "policy": _policy_to_spec(_parse_policy(raw.get("policy"))),
    }
    if raw["kind"] in ("discrete", "bridge"):
        out["family"] = raw.get("family", [])
    else:
        out["cylinders"] = raw.get("cylinders", [])
    return out


def serialize_instance(inst: Instance) -> str:
    return json.dumps(inst.raw, sort_keys=True, separators=(",", ":")) + "\n"


@dataclass
class Report:
    command: str
    kind: str
    results: list
    status: str  # ok | inconclusive | hypothesis_failure

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "kind": self.kind,
            "status": self.status,
            "results": self.results,
        }


def _entropy_json(v: EntropyValue):
    return v.to_json()


def _trajectory_result(idx: int, rep: discrete.TrajectoryReport) -> dict:
    out = {
        "subgroup": idx,
        "status": rep.status,
        "orders": list(rep.orders),
        "indices": list(rep.alphas),
        "f_order": rep.f_order,
    }
    if rep.certified:
        out.update(
            {
                "n0": rep.n0,
                "alpha": rep.alpha,
                "t_mod_phi_t": rep.t_mod_phi_t,
                "ker_cap_t": rep.ker_cap_t,
                "entropy": _entropy_json(
                    EntropyValue.of_log(Fraction(rep.t_mod_phi_t, rep.ker_cap_t))
                ),
                "entropy_limit": _entropy_json(EntropyValue.of_log(rep.alpha)),
                "yuzvinski_gap": _entropy_json(EntropyValue.of_log(rep.t_mod_phi_t)),
            }
        )
    return out


def _cotrajectory_result(idx: int, rep: profinite.CotrajectoryReport) -> dict:
    out = {
        "subgroup": idx,
        "status": rep.status,
        "c": list(rep.c),
        "indices": list(rep.alphas),
    }
    if rep.certified:
        out.update(
            {
                "n0": rep.n0,
                "n1": rep.n1,
                "alpha": rep.alpha,
                "psi_inv_c_mod_c": rep.psi_inv_c_mod_c,
                "k_mod_l": rep.k_mod_l,
                "entropy": _entropy_json(
                    EntropyValue.of_log(Fraction(rep.psi_inv_c_mod_c, rep.k_mod_l))
                ),
                "entropy_limit": _entropy_json(EntropyValue.of_log(rep.alpha)),
            }
        )
    return out


def _map_over(items, fn, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_command(cmd: str, inst: Instance, method: str | None = None, jobs: int = 1) -> Report:
    """Dispatch a command against a parsed instance."""
    compatible = {
        "alg-entropy": ("discrete",),
        "top-entropy": ("profinite",),
        "bridge-check": ("bridge",),
        "depth": ("depth",),
        "verify": ("discrete", "profinite", "bridge", "depth"),
    }
    if cmd not in compatible:
        raise ValidationError(f"unknown command {cmd!r}")
    if inst.kind not in compatible[cmd]:
        raise ValidationError(f"command {cmd!r} incompatible with kind {inst.kind!r}")

    if cmd == "alg-entropy":
        return _run_alg_entropy(inst, jobs)
    if cmd == "top-entropy":
        return _run_top_entropy(inst, method, jobs)
    if cmd == "bridge-check":
        return _run_bridge(inst)
    if cmd == "depth":
        return _run_depth(inst, jobs)
    return _run_verify(inst, jobs)


def _status_of(results) -> str:
    statuses = [r.get("status", "ok") for r in results]
    if any(s == "hypothesis_failure" for s in statuses):
        return "hypothesis_failure"
    if any(s == "inconclusive" for s in statuses):
        return "inconclusive"
    return "ok"


def _run_alg_entropy(inst: Instance, jobs: int) -> Report:
    def one(pair):
        idx, gens = pair
        rep = discrete.trajectory_limits(inst.endo, gens, inst.policy)
        return _trajectory_result(idx, rep)

    results = _map_over(list(enumerate(inst.family)), one, jobs)
    report = Report("alg-entropy", inst.kind, results, _status_of(results))
    if all(r["status"] == "certified" for r in results) and results:
        best = max(
            Fraction(r["t_mod_phi_t"], r["ker_cap_t"]) for r in results
        )
        report.results.append({"h_alg_lower_bound": _entropy_json(EntropyValue.of_log(best))})
    return report


def _run_top_entropy(inst: Instance, method: str | None, jobs: int) -> Report:
    def one(pair):
        idx, cyl = pair
        rep = profinite.cotrajectory_limits(inst.endo, cyl, inst.policy)
        out = _cotrajectory_result(idx, rep)
        if rep.certified and method == "surjective":
            try:
                v = profinite.topological_entropy(inst.endo, cyl, "surjective", inst.policy)
                out["entropy_surjective"] = _entropy_json(v)
            except ValidationError as exc:
                out["entropy_surjective_error"] = str(exc)
        return out

    results = _map_over(list(enumerate(inst.cylinders)), one, jobs)
    report = Report("top-entropy", inst.kind, results, _status_of(results))
    if all(r["status"] == "certified" for r in results) and results:
        best = max(
            Fraction(r["psi_inv_c_mod_c"], r["k_mod_l"]) for r in results
        )
        report.results.append({"h_top_lower_bound": _entropy_json(EntropyValue.of_log(best))})
    return report


def _records_json(records) -> list:
    return [r.to_json() for r in records]


def _run_bridge(inst: Instance) -> Report:
    rep = duality.weiss_bridge_check(inst.group, inst.endo, inst.family, inst.policy)
    results = []
    for i, (records, ok) in enumerate(rep.entries):
        results.append(
            {
                "subgroup": i,
                "status": "certified" if ok else "inconclusive",
                "checks": _records_json(records),
            }
        )
    results.append(
        {
            "h_alg": _entropy_json(rep.h_alg_value),
            "h_top": _entropy_json(rep.h_top_value),
            "bridge_equal": rep.ok,
        }
    )
    return Report("bridge-check", inst.kind, results, "ok" if rep.ok else "inconclusive")


def _run_depth(inst: Instance, jobs: int = 1) -> Report:
    rep = depth_mod.depth_report(inst.endo, inst.cylinders, inst.policy, jobs=jobs)
    results = []
    for i, cand in enumerate(rep.candidates):
        results.append(
            {
                "candidate": i,
                "status": cand.status,
                "depth_via_minus": cand.depth_via_minus,
                "depth_via_plus": cand.depth_via_plus,
            }
        )
    results.append(
        {
            "depth": rep.depth,
            "depth_inverse": rep.depth_inverse,
            "h_top": _entropy_json(rep.h_top_value),
            "inverse_band": {
                "offset": rep.inverse.offset,
                "width": rep.inverse.width,
                "period": rep.inverse.period,
            },
            "checks": _records_json(rep.checks),
        }
    )
    ok = all(c.ok for c in rep.checks)
    return Report("depth", inst.kind, results, "ok" if ok else "inconclusive")


def _verify_discrete(inst: Instance, jobs: int) -> list:
    def one(pair):
        idx, gens = pair
        rep = discrete.trajectory_limits(inst.endo, gens, inst.policy)
        checks = []
        if inst.group.is_abelian:
            div_ok = all(
                rep.alphas[i] % rep.alphas[i + 1] == 0 for i in range(len(rep.alphas) - 1)
            )
            checks.append(CheckRecord("index_divisibility_chain", div_ok))
        if rep.certified:
            lf = Fraction(rep.t_mod_phi_t, rep.ker_cap_t)
            checks.append(
                CheckRecord("limit_equals_limitfree", lf == Fraction(rep.alpha),
                            lhs=lf, rhs=rep.alpha)
            )
            if rep.ker_cap_t == 1:
                checks.append(
                    CheckRecord("injective_one_term_formula",
                                rep.t_mod_phi_t == rep.alpha,
                                lhs=rep.t_mod_phi_t, rhs=rep.alpha)
                )
            else:
                checks.append(
                    CheckRecord("uncorrected_formula_gap_expected",
                                rep.t_mod_phi_t > rep.alpha,
                                lhs=rep.t_mod_phi_t, rhs=rep.alpha,
                                note="gap between log|T/phi T| and the entropy")
                )
        out = _trajectory_result(idx, rep)
        out["checks"] = _records_json(checks)
        if not all(c.ok for c in checks):
            out["status"] = "inconclusive"
        return out

    return _map_over(list(enumerate(inst.family)), one, jobs)


def _verify_profinite(inst: Instance, jobs: int) -> list:
    def one(pair):
        idx, cyl = pair
        rep = profinite.cotrajectory_limits(inst.endo, cyl, inst.policy)
        checks = []
        div_c = all(rep.c[i + 1] % rep.c[i] == 0 for i in range(len(rep.c) - 1))
        div_a = all(
            rep.alphas[i] % rep.alphas[i + 1] == 0 for i in range(len(rep.alphas) - 1)
        )
        checks.append(CheckRecord("c_divisibility_chain", div_c))
        checks.append(CheckRecord("alpha_divisibility_chain", div_a))
        if rep.certified:
            lf = Fraction(rep.psi_inv_c_mod_c, rep.k_mod_l)
            checks.append(
                CheckRecord("limit_equals_limitfree", lf == Fraction(rep.alpha),
                            lhs=lf, rhs=rep.alpha)
            )
            if profinite.surjective_on_windows(inst.endo, inst.policy):
                checks.append(
                    CheckRecord("surjective_one_term_formula",
                                rep.psi_inv_c_mod_c == rep.alpha and rep.k_mod_l == 1,
                                lhs=rep.psi_inv_c_mod_c, rhs=rep.alpha)
                )
                checks.append(profinite.log_law_check(inst.endo, cyl, 2, inst.policy))
            try:
                qs = profinite.quotient_system(inst.endo, cyl, inst.policy)
                checks.extend(qs.checks)
            except Inconclusive:
                checks.append(
                    CheckRecord(
                        "quotient_system", True,
                        note="cotrajectory is a half line; quotient not materialized",
                    )
                )
        out = _cotrajectory_result(idx, rep)
        out["checks"] = _records_json(checks)
        if not all(c.ok for c in checks):
            out["status"] = "inconclusive"
        return out

    return _map_over(list(enumerate(inst.cylinders)), one, jobs)


def _run_verify(inst: Instance, jobs: int) -> Report:
    if inst.kind == "discrete":
        results = _verify_discrete(inst, jobs)
    elif inst.kind == "profinite":
        results = _verify_profinite(inst, jobs)
    elif inst.kind == "bridge":
        results = _run_bridge(inst).results
    else:
        results = _run_depth(inst, jobs).results
    return Report("verify", inst.kind, results, _status_of(results))


def emit_report(report: Report, fmt: str = "json") -> str:
    """Render a report; json output is canonical and byte-stable."""
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
    if fmt != "text":
        raise ValidationError(f"unknown format {fmt!r}")
    lines = [f"{report.command} [{report.kind}] status={report.status}"]
    for r in report.results:
        lines.append("  " + json.dumps(r, sort_keys=True, default=str))
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="entctl",
        description="Exact algebraic/topological entropy and depth computations",
    )
    parser.add_argument(
        "command",
        choices=["alg-entropy", "top-entropy", "bridge-check", "depth", "verify"],
    )
    parser.add_argument("instance", help="path to an instance JSON file")
    parser.add_argument("--method", choices=["limit", "limitfree", "surjective"])
    parser.add_argument("--max-n", type=int, dest="max_n")
    parser.add_argument("--stall", type=int)
    parser.add_argument("--format", choices=["text", "json"], default="json")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        inst = parse_instance(args.instance)
        if args.max_n or args.stall:
            inst.policy = StabilizationPolicy(
                max_n=args.max_n or inst.policy.max_n,
                stall_window=args.stall or inst.policy.stall_window,
                window_budget=inst.policy.window_budget,
            )
        report = run_command(args.command, inst, method=args.method, jobs=args.jobs)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "validation", "message": str(exc)}), file=sys.stderr)
        return EXIT_VALIDATION
    except (HypothesisFailure, InversionFailure) as exc:
        print(json.dumps({"error": "hypothesis", "message": str(exc)}), file=sys.stderr)
        return EXIT_HYPOTHESIS
    except Inconclusive as exc:
        print(json.dumps({"error": "inconclusive", "message": str(exc)}), file=sys.stderr)
        return EXIT_INCONCLUSIVE

    sys.stdout.write(emit_report(report, args.format))
    if report.status == "hypothesis_failure":
        return EXIT_HYPOTHESIS
    if report.status != "ok":
        return EXIT_INCONCLUSIVE
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
