# core/feasibility.py

from typing import Any, Dict, List, Optional

import numpy as np

from core.models import NettingProblem

# relative slack when comparing scheduled energy with the line limits
_REL_EPS = 1e-9


def window_of(tp_index: int, window_tps: Optional[int]) -> int:
    """0-based window holding 0-based TP tp_index."""
    return 0 if window_tps is None else tp_index // int(window_tps)


def analyze_feasibility(problem: NettingProblem, window_tps: Optional[int] = None) -> Dict[str, Any]:
    """
    Structural check of the netting LP before solving:
      - every AC line's scheduled TP energy must be reachable within its bounds
      - reports how close each line runs to its limits
    Returns a dict with summary numbers, the violations and warning strings.
    """
    result: Dict[str, Any] = {}
    warnings: List[str] = []
    violations: List[Dict[str, Any]] = []

    res = problem.resolution
    # average power each TP must carry, MW
    required = problem.ac_energy / res.tp_hours

    utilisation = {}
    for l, line_id in enumerate(problem.line_ids):
        lo, hi = problem.lower[l], problem.upper[l]
        slack = _REL_EPS * max(1.0, abs(lo), abs(hi))

        for t in np.flatnonzero((required[l] > hi + slack) | (required[l] < lo - slack)):
            violations.append(
                {
                    "line": line_id,
                    "tp_index": int(t) + 1,
                    "window": window_of(int(t), window_tps),
                    "required_mw": float(required[l, t]),
                    "lower_mw": float(lo),
                    "upper_mw": float(hi),
                }
            )

        span = max(hi, -lo)
        utilisation[line_id] = float(np.max(np.abs(required[l])) / span) if span > 0 else 0.0
        if span > 0 and utilisation[line_id] >= 1.0 - 1e-12:
            warnings.append(f"Line {line_id} is scheduled at its limit; no room to net imbalances there.")

    for v in violations:
        warnings.append(
            f"Line {v['line']} TP {v['tp_index']}: scheduled {v['required_mw']:.3f} MW "
            f"outside [{v['lower_mw']:.3f}, {v['upper_mw']:.3f}] MW."
        )

    result["num_lines"] = len(problem.line_ids)
    result["num_tps"] = problem.n_tps
    result["max_utilisation"] = utilisation
    result["violations"] = violations
    result["warnings"] = warnings
    result["feasible"] = len(violations) == 0
    return result
