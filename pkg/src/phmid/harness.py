"""
Experiment orchestration: seeded runs, the K_B convergence-speed metric,
step-size sweeps and deterministic CSV export.

A run builds graph, costs and scheme from spec strings, computes the
centralized optimum as the error reference, iterates the scheme from a
seeded standard-normal q(0) (p(0) = 0) and records the consensus error
``||q[k] - 1 (x) theta*||`` at every step. Runs never stop early on
convergence: the full trace is needed to evaluate K_B, the first step
after which the error stays at or below the accuracy bound for the rest
of the horizon.
"""

import json
import time

import numpy as np

from . import costs as costs_mod
from . import graphs as graphs_mod
from . import integrators
from .dynamics import NetworkState, bregman_lyapunov, equilibrium_state

DIVERGENCE_LIMIT = 1e12

STATUS_MAX_STEPS = "MaxSteps"
STATUS_DIVERGED = "Diverged"
STATUS_CONVERGED = "Converged"

NOT_REACHED = "NotReached"


class ExperimentConfig:
    """Everything needed to reproduce one run byte for byte.

    The graph and cost spec strings carry their own generation seeds;
    `seed` drives the initial condition.
    """

    def __init__(self, graph_spec, cost_spec, scheme_spec, steps,
                 accuracy_b=1e-6, seed=0, record_lyapunov=False,
                 output_path=None):
        if steps < 1:
            raise ValueError("steps must be >= 1")
        if not accuracy_b > 0:
            raise ValueError("accuracy_b must be > 0")
        self.graph_spec = str(graph_spec)
        self.cost_spec = str(cost_spec)
        self.scheme_spec = str(scheme_spec)
        self.steps = int(steps)
        self.accuracy_b = float(accuracy_b)
        self.seed = int(seed)
        self.record_lyapunov = bool(record_lyapunov)
        self.output_path = output_path

    def replaced(self, **kwargs):
        fields = dict(graph_spec=self.graph_spec, cost_spec=self.cost_spec,
                      scheme_spec=self.scheme_spec, steps=self.steps,
                      accuracy_b=self.accuracy_b, seed=self.seed,
                      record_lyapunov=self.record_lyapunov,
                      output_path=self.output_path)
        fields.update(kwargs)
        return ExperimentConfig(**fields)

    @classmethod
    def from_dict(cls, data):
        known = {"graph_spec", "cost_spec", "scheme_spec", "steps",
                 "accuracy_b", "seed", "record_lyapunov", "output_path"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path, overrides=None):
        """Load a config from JSON; explicit overrides win over the file."""
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        data.update(overrides or {})
        return cls.from_dict(data)

    def __repr__(self):
        return (f"ExperimentConfig(graph={self.graph_spec!r}, "
                f"cost={self.cost_spec!r}, scheme={self.scheme_spec!r}, "
                f"steps={self.steps}, seed={self.seed})")


class RunTrace:
    """Per-step records of one run.

    errors[k] is the consensus error after k steps (errors[0] is the
    initial one); `lyapunov` holds the storage-based value |x - x*|^2/2
    when recording was requested (None otherwise, and for the tracking
    baseline which has no p block). State histories are kept only when
    recording was requested, for the certificate audit.
    """

    def __init__(self, errors, lyapunov, newton_max_iters, wall_ns, status,
                 theta_star, q_history=None, p_history=None):
        self.errors = np.asarray(errors, dtype=float)
        self.lyapunov = None if lyapunov is None else np.asarray(lyapunov, dtype=float)
        self.newton_max_iters = np.asarray(newton_max_iters, dtype=int)
        self.wall_ns = np.asarray(wall_ns, dtype=np.int64)
        self.status = status
        self.theta_star = np.asarray(theta_star, dtype=float)
        self.q_history = q_history
        self.p_history = p_history

    @property
    def final_error(self):
        return float(self.errors[-1])

    def __repr__(self):
        return (f"RunTrace(steps={len(self.errors) - 1}, status={self.status!r}, "
                f"final_error={self.final_error:.3e})")


def _consensus_error(q, theta_star):
    return float(np.linalg.norm(q - theta_star[None, :]))


def run(config):
    """Execute one experiment and return its trace."""
    graph = graphs_mod.from_spec(config.graph_spec)
    ensemble = costs_mod.from_spec(config.cost_spec, graph.n)
    scheme = integrators.parse_scheme_spec(config.scheme_spec)
    theta_star = ensemble.centralized_optimum(tol=1e-12)

    rng = np.random.default_rng(config.seed)
    q0 = rng.standard_normal((graph.n, ensemble.dim))
    p0 = np.zeros_like(q0)

    record = config.record_lyapunov and scheme.kind != "gt"
    equilibrium = None
    if record:
        mid_tau = scheme.tau if scheme.kind == "mid" else None
        equilibrium = equilibrium_state(ensemble, graph,
                                        initial=NetworkState(q0, p0),
                                        mid_tau=mid_tau)

    errors = [_consensus_error(q0, theta_star)]
    newton_iters = [0]
    wall_ns = [0]
    lyap = None
    q_hist = p_hist = None
    state = NetworkState(q0, p0)
    gt_state = None
    gt_weights = None
    if scheme.kind == "gt":
        gt_state = integrators.gradient_tracking_init(q0, ensemble)
        gt_weights = integrators.metropolis_weights(graph)
    if record:
        lyap = [bregman_lyapunov(state, equilibrium)]
        q_hist = [q0.copy()]
        p_hist = [p0.copy()]

    status = STATUS_MAX_STEPS
    for _ in range(config.steps):
        tic = time.perf_counter_ns()
        iters = 0
        if scheme.kind == "euler":
            new_q, new_p = _euler_arrays(state, ensemble, graph, scheme.tau)
        elif scheme.kind == "dg":
            report = integrators.dg_central_step(state, ensemble, graph,
                                                 scheme.tau, scheme.solver)
            new_q, new_p = report.state.q, report.state.p
            iters = int(report.newton_iterations.max())
        elif scheme.kind == "mid":
            report = integrators.mid_step(state, ensemble, graph,
                                          scheme.tau, scheme.solver)
            new_q, new_p = report.state.q, report.state.p
            iters = int(report.newton_iterations.max())
        else:  # gt
            gt_state = integrators.gradient_tracking_step(
                gt_state, ensemble, graph, scheme.tau, gt_weights)
            new_q, new_p = gt_state.q, None
        toc = time.perf_counter_ns()

        norm_sq = float(np.sum(new_q ** 2))
        if new_p is not None:
            norm_sq += float(np.sum(new_p ** 2))
        if not np.isfinite(norm_sq) or norm_sq > DIVERGENCE_LIMIT ** 2:
            status = STATUS_DIVERGED
            break

        if new_p is not None:
            state = NetworkState(new_q, new_p)
        errors.append(_consensus_error(new_q, theta_star))
        newton_iters.append(iters)
        wall_ns.append(toc - tic)
        if record:
            lyap.append(bregman_lyapunov(state, equilibrium))
            q_hist.append(new_q.copy())
            p_hist.append(new_p.copy())

    return RunTrace(errors=errors, lyapunov=lyap, newton_max_iters=newton_iters,
                    wall_ns=wall_ns, status=status, theta_star=theta_star,
                    q_history=None if q_hist is None else np.stack(q_hist),
                    p_history=None if p_hist is None else np.stack(p_hist))


def _euler_arrays(state, ensemble, graph, tau):
    new = integrators.euler_step(state, ensemble, graph, tau)
    return new.q, new.p


def k_b(trace, accuracy_b):
    """First step index after which the error never exceeds the bound.

    Returns None (not reached) when the run diverged or the final error
    still exceeds the bound; the answer is relative to the recorded
    horizon. Accepts a RunTrace or a bare error sequence.
    """
    if not accuracy_b > 0:
        raise ValueError("accuracy bound must be > 0")
    if isinstance(trace, RunTrace):
        if trace.status == STATUS_DIVERGED:
            return None
        errors = trace.errors
    else:
        errors = np.asarray(trace, dtype=float)
    above = np.nonzero(errors > accuracy_b)[0]
    if above.size == 0:
        return 0
    first_ok = int(above[-1]) + 1
    if first_ok >= errors.shape[0]:
        return None
    return first_ok


class SweepRow:
    """One (scheme, tau) cell of a sweep."""

    def __init__(self, scheme, tau, k_b_value, final_error, status):
        self.scheme = scheme
        self.tau = float(tau)
        self.k_b = k_b_value
        self.final_error = float(final_error)
        self.status = status


class SweepTable:
    """Rows of a step-size sweep, exportable to CSV."""

    columns = ("scheme", "tau", "k_b", "final_error", "status")

    def __init__(self, rows):
        self.rows = list(rows)

    def by_scheme(self, scheme):
        return [r for r in self.rows if r.scheme == scheme]

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def tau_sweep(base_config, tau_values, schemes):
    """Run every (scheme, tau) cell with shared seeds and collect K_B.

    All cells reuse the base config's seed and spec strings, so data and
    initialization are identical across cells; only the scheme changes.
    """
    rows = []
    for scheme in schemes:
        kind = str(scheme).split(":")[0]
        for tau in tau_values:
            if not tau > 0:
                raise ValueError("all tau values must be > 0")
            cfg = base_config.replaced(scheme_spec=f"{kind}:tau={tau!r}")
            trace = run(cfg)
            rows.append(SweepRow(kind, tau, k_b(trace, cfg.accuracy_b),
                                 trace.final_error, trace.status))
    return SweepTable(rows)


def _fmt(x):
    return format(float(x), ".17g")


def export_csv(obj, path):
    """Write a trace or sweep table as CSV.

    Formatting is deterministic: 17 significant digits, '.' decimal
    separator, '\\n' line endings. Trace columns: step, error, lyapunov,
    newton_max_iters, wall_ns (lyapunov empty when not recorded). Sweep
    columns: scheme, tau, k_b, final_error, status.
    """
    if isinstance(obj, RunTrace):
        lines = ["step,error,lyapunov,newton_max_iters,wall_ns"]
        for k in range(len(obj.errors)):
            lyap = "" if obj.lyapunov is None else _fmt(obj.lyapunov[k])
            lines.append(f"{k},{_fmt(obj.errors[k])},{lyap},"
                         f"{int(obj.newton_max_iters[k])},{int(obj.wall_ns[k])}")
    elif isinstance(obj, SweepTable):
        lines = [",".join(SweepTable.columns)]
        for row in obj:
            kb = NOT_REACHED if row.k_b is None else str(int(row.k_b))
            lines.append(f"{row.scheme},{_fmt(row.tau)},{kb},"
                         f"{_fmt(row.final_error)},{row.status}")
    else:
        raise TypeError(f"cannot export object of type {type(obj).__name__}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
