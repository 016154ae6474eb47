"""Symptom-to-source traversal: AQ1 (route) -> AQ2 (localize) -> AQ3
(externalize).

One attribution run per view. Where the Shapley mass concentrates
determines the attribution pattern, which either terminates the trace
with a verdict or routes to the next view: system view to the implicated
subsystem, subsystem boundary to the environment. Distributed mass opens
bounded parallel branches instead of committing to a single path.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .attribution import AttributionResult, attribute
from .dataset import WindowedDataset, resolve_column
from .errors import InsufficientData, NoDataForView, NoRoute, UnknownAlert, ViewMismatch
from .mapcore import NodeKind, SystemMap, View, ViewType
from .mechanisms import MechanismSet, ShiftTestResult, fit_mechanisms, shift_test


class Pattern(enum.Enum):
    AP1_1 = "AP1.1"   # subsystem isolated: conditional system variable
    AP1_2 = "AP1.2"   # isolated at boundary: root system variable (features)
    AP2_1 = "AP2.1"   # root cause localized: modulator
    AP2_2 = "AP2.2"   # component localized: internal data variable
    AP2_3 = "AP2.3"   # localized at input boundary
    AP3_1 = "AP3.1"   # explained externally: upstream random variable
    AP3_2 = "AP3.2"   # cannot determine: mass on the implicated variable
    DISTRIBUTED = "distributed"
    NEGLIGIBLE = "negligible"


@dataclass(frozen=True)
class TraceConfig:
    bins: int = 8
    alpha_smoothing: float = 1.0
    tau: float = 0.5
    epsilon: float = 2e-3
    branch_cutoff: float = 0.2
    alert_level: float = 0.01
    permutations: int = 500          # sampled-Shapley player orders
    test_permutations: int = 1000    # two-sample permutation test re-splits
    seed: int = 0
    mode: str = "auto"               # auto | exact | sampled
    max_branches: int = 3
    eager_environment: bool = False
    divergence: str = "jsd"
    state_limit: int = 1_000_000


@dataclass(frozen=True)
class Verdict:
    kind: str                        # root-cause | component | external | undetermined | negligible
    node: Optional[str] = None
    view: Optional[str] = None
    detail: str = ""


@dataclass
class TraceStep:
    aq: int
    view: View
    target: str
    result: AttributionResult
    pattern: Pattern
    note: Optional[str] = None
    verdicts: list = field(default_factory=list)      # verdicts decided at this step
    children: list = field(default_factory=list)      # deeper TraceSteps
    routed_to: Optional[str] = None                   # view name, when routing


@dataclass
class TraceReport:
    alert: str
    root: TraceStep
    verdicts: tuple
    excluded_environment: tuple
    warnings: tuple


def match_pattern(view: View, system_map: SystemMap, result: AttributionResult,
                  implicated: Optional[str] = None) -> Pattern:
    """Attribution pattern for one result on one view.

    For the environment view, ``implicated`` defaults to the result's
    target (the random variable whose proxy routed us here).
    """
    if result.view != view:
        raise ViewMismatch(
            f"result computed on view '{result.view.name}', not '{view.name}'"
        )
    cls = result.classification
    if cls.kind == "negligible":
        return Pattern.NEGLIGIBLE
    if cls.kind == "distributed":
        return Pattern.DISTRIBUTED
    node = cls.top
    graph = system_map.view_graph(view)
    if view.type is ViewType.ML_SYSTEM:
        return Pattern.AP1_1 if graph.parents[node] else Pattern.AP1_2
    if view.type is ViewType.SUBSYSTEM:
        n = system_map.node(node)
        if n.kind is NodeKind.MODULATOR:
            return Pattern.AP2_1
        if n.boundary:
            return Pattern.AP2_3
        return Pattern.AP2_2
    # environment view
    if implicated is None:
        implicated = result.target
    if node == implicated:
        return Pattern.AP3_2
    if node in graph.ancestors(implicated):
        return Pattern.AP3_1
    return Pattern.AP3_2


class _Tracer:
    def __init__(self, system_map: SystemMap, ds: WindowedDataset,
                 config: TraceConfig):
        self.map = system_map
        self.ds = ds
        self.config = config
        self.warnings: list[str] = []
        self._mech_cache: dict[str, MechanismSet] = {}

    def mechanisms_for(self, view: View) -> MechanismSet:
        if view.name not in self._mech_cache:
            self._mech_cache[view.name] = fit_mechanisms(
                self.map, self.ds, view,
                k=self.config.bins, alpha=self.config.alpha_smoothing,
            )
        return self._mech_cache[view.name]

    def attribute(self, view: View, target: str) -> AttributionResult:
        cfg = self.config
        return attribute(
            self.mechanisms_for(view), target,
            mode=cfg.mode, permutations=cfg.permutations, seed=cfg.seed,
            div=cfg.divergence, tau=cfg.tau, epsilon=cfg.epsilon,
            branch_cutoff=cfg.branch_cutoff, state_limit=cfg.state_limit,
        )

    # -- one step per view --------------------------------------------

    def step(self, aq: int, view: View, target: str,
             implicated: Optional[str] = None) -> TraceStep:
        result = self.attribute(view, target)
        pattern = match_pattern(view, self.map, result, implicated)
        step = TraceStep(aq=aq, view=view, target=target, result=result,
                         pattern=pattern)
        if pattern is Pattern.NEGLIGIBLE:
            step.verdicts.append(Verdict("negligible", view=view.name,
                                         detail="no attributable shift"))
            return step
        if pattern is Pattern.DISTRIBUTED:
            branches = result.classification.nodes
            kept = branches[: self.config.max_branches]
            if len(branches) > len(kept):
                extra = ", ".join(branches[len(kept):])
                self.warnings.append(
                    f"{view.name}: distributed mass, branches not expanded: {extra}"
                )
            for node in kept:
                self.route(step, aq, view, node, implicated)
            return step
        self.route(step, aq, view, result.classification.top, implicated)
        return step

    # -- routing shared by concentrated mass and distributed branches --

    def route(self, step: TraceStep, aq: int, view: View, node: str,
              implicated: Optional[str]):
        if aq == 1:
            self._route_system(step, node)
        elif aq == 2:
            self._route_subsystem(step, view, node)
        else:
            self._route_environment(step, view, node, implicated)

    def _route_system(self, step: TraceStep, node: str):
        try:
            subview = self.map.route_subsystem(node)
        except NoRoute:
            step.verdicts.append(Verdict(
                "undetermined", node=node,
                detail=f"no subsystem view produces '{node}'",
            ))
            return
        step.routed_to = subview.name
        terminal = self.map.terminal_of(subview)
        step.children.append(self.step(2, subview, terminal.qname))
        is_root = not self.map.view_graph(self.map.system_view()).parents[node]
        if is_root and self.config.eager_environment:
            env = self.map.environment_view()
            sources = self.map.measure_sources(node)
            if env is not None and sources:
                for src in sources:
                    step.children.append(self.step(3, env, src, implicated=src))

    def _route_subsystem(self, step: TraceStep, view: View, node: str):
        n = self.map.node(node)
        if n.kind is NodeKind.MODULATOR:
            step.verdicts.append(Verdict("root-cause", node=node, view=view.name,
                                         detail="mechanism change at a modulator"))
            return
        if not n.boundary:
            step.verdicts.append(Verdict(
                "component", node=node, view=view.name,
                detail="internal data variable; manual investigation required",
            ))
            return
        env = self.map.environment_view()
        if env is None:
            step.verdicts.append(Verdict(
                "undetermined", node=node,
                detail="boundary reached but no environment view is modeled",
            ))
            return
        sources = self.map.measure_sources(node)
        if not sources:
            # the boundary variable itself has no proxy link; fall back to
            # the feature through which the trace entered this subsystem
            terminal = self.map.terminal_of(view)
            sources = self.map.measure_sources(terminal.qname)
        if not sources:
            step.verdicts.append(Verdict(
                "undetermined", node=node,
                detail="no measured environment proxy for the boundary",
            ))
            return
        step.routed_to = env.name
        for src in sources[: self.config.max_branches]:
            step.children.append(self.step(3, env, src, implicated=src))

    def _route_environment(self, step: TraceStep, view: View, node: str,
                           implicated: Optional[str]):
        implicated = implicated or step.target
        graph = self.map.view_graph(view)
        if node != implicated and node in graph.ancestors(implicated):
            step.verdicts.append(Verdict(
                "external", node=node, view=view.name,
                detail="shift explained by an upstream environmental change",
            ))
            return
        if node != implicated:
            step.note = "non-ancestral mass"
        step.verdicts.append(Verdict(
            "undetermined", node=node, view=view.name,
            detail="mass on the implicated variable itself; the cause may be "
                   "internal or a hidden environmental confounder",
        ))


def trace(system_map: SystemMap, ds: WindowedDataset, alert: str,
          config: TraceConfig = TraceConfig()) -> TraceReport:
    """Trace one alerted system-view variable from symptom to source."""
    if not system_map.has_node(alert):
        raise UnknownAlert(f"unknown alert node '{alert}'")
    node = system_map.node(alert)
    if node.view.type is not ViewType.ML_SYSTEM or node.kind is not NodeKind.DATA:
        raise UnknownAlert(f"'{alert}' is not a data node of the ML-system view")

    tracer = _Tracer(system_map, ds, config)
    root = tracer.step(1, system_map.system_view(), alert)

    verdicts: list[Verdict] = []

    def collect(step: TraceStep):
        verdicts.extend(step.verdicts)
        for child in step.children:
            collect(child)

    collect(root)

    excluded = []
    env = system_map.environment_view()
    if env is not None:
        for n in system_map.view_nodes(env):
            if resolve_column(ds, system_map, n.qname) is None:
                excluded.append(n.qname)

    return TraceReport(
        alert=alert,
        root=root,
        verdicts=tuple(verdicts),
        excluded_environment=tuple(sorted(excluded)),
        warnings=tuple(tracer.warnings),
    )


def detect_alerts(system_map: SystemMap, ds: WindowedDataset,
                  alpha: float = 0.01, B: int = 1000, seed: int = 0):
    """Shift tests on every ML-system data variable; significant ones only.

    Returns ShiftTestResult entries with p <= alpha, sorted by ascending
    p-value then node name. Variables without enough data are skipped.
    """
    system = system_map.system_view()
    results: list[ShiftTestResult] = []
    nodes = sorted(n.qname for n in system_map.view_nodes(system)
                   if n.kind is NodeKind.DATA)
    for i, qname in enumerate(nodes):
        try:
            results.append(shift_test(ds, system_map, qname, B=B, seed=[seed, i]))
        except InsufficientData:
            continue
    hits = [r for r in results if r.p_value <= alpha]
    return sorted(hits, key=lambda r: (r.p_value, r.node))
