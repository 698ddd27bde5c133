"""
Kohn's multiplier calculus as an append-only, re-verifiable trace.

A trace starts from pre-multipliers (order 1/2) and grows by two rules:
P1 takes the Jacobian determinant of n multipliers and halves the order
(capped at 1/2 first), P2 takes a root of an element of the ideal they
generate and divides the order by the root order. Every node stores what
is needed to re-check it from its inputs alone.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple

import pandas as pd

from config import ResourceCaps
from errors import DimensionError, DomainError, NotInRadicalError
from localalg import MembershipCertificate, Multiplicity, radical_membership_power
from models import TraceModel, TraceNodeModel, CertificateModel, PolyModel, dump_json
from polyring import Poly, RandomSource, jacobian_det

logger = logging.getLogger(__name__)

PRE_MULTIPLIER_ORDER = Fraction(1, 2)
P1_ORDER_CAP = Fraction(1, 2)
AXIOM_ORDER_CAP = Fraction(1, 2)


class NodeKind(str, Enum):
    PRE = "Pre"
    P1 = "P1"
    P2 = "P2"
    AXIOM = "Axiom"


@dataclass(frozen=True)
class Multiplier:
    poly: Poly
    order: Fraction
    node: int


@dataclass(frozen=True)
class TraceNode:
    id: int
    kind: NodeKind
    inputs: Tuple[int, ...]
    output: Poly
    order: Fraction
    variables: Tuple[int, ...] = ()
    root: Optional[int] = None
    certificate: Optional[MembershipCertificate] = None
    combination: Optional[Tuple[Fraction, ...]] = None
    note: str = ""


def order_after_p1(orders: Sequence[Fraction]) -> Fraction:
    return min(P1_ORDER_CAP, min(orders)) / 2


def order_after_p2(orders: Sequence[Fraction], root: int) -> Fraction:
    return min(orders) / root


class Trace:
    """Append-only DAG of procedure applications over a fixed ring."""

    def __init__(self, nvars: int, premultipliers: Sequence[Poly] = ()):
        self.nvars = nvars
        self.premultipliers: Tuple[Poly, ...] = tuple(premultipliers)
        self.nodes: List[TraceNode] = []
        for p in self.premultipliers:
            if p.nvars != nvars:
                raise DimensionError(f"Pre-multiplier {p} does not live in {nvars} variables")

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[TraceNode]:
        return iter(self.nodes)

    def node(self, node_id: int) -> TraceNode:
        if not 0 <= node_id < len(self.nodes):
            raise DomainError(f"Trace has no node {node_id}")
        return self.nodes[node_id]

    def multiplier(self, node_id: int) -> Multiplier:
        node = self.node(node_id)
        return Multiplier(node.output, node.order, node.id)

    def append(self, node: TraceNode) -> Multiplier:
        if node.id != len(self.nodes):
            raise DomainError(f"Node id {node.id} breaks the append-only numbering at {len(self.nodes)}")
        for i in node.inputs:
            if not 0 <= i < node.id:
                raise DomainError(f"Node {node.id} refers to input {i}, which does not precede it")
        if node.output.nvars != self.nvars:
            raise DimensionError(f"Node output lives in {node.output.nvars} variables, trace in {self.nvars}")
        self.nodes.append(node)
        logger.debug(f"Trace node {node.id} ({node.kind.value}) order {node.order}")
        return Multiplier(node.output, node.order, node.id)

    def _check_handle(self, m: Multiplier) -> None:
        node = self.node(m.node)
        if node.output != m.poly or node.order != m.order:
            raise DomainError(f"Multiplier does not match trace node {m.node}")

    # statistics

    @property
    def p1_steps(self) -> int:
        return sum(1 for n in self.nodes if n.kind == NodeKind.P1)

    @property
    def p2_steps(self) -> int:
        return sum(1 for n in self.nodes if n.kind == NodeKind.P2)

    @property
    def max_root(self) -> int:
        return max((n.root for n in self.nodes if n.kind == NodeKind.P2), default=0)

    # serialization

    def to_model(self) -> TraceModel:
        return TraceModel(
            nvars=self.nvars,
            premultipliers=[PolyModel.from_poly(p) for p in self.premultipliers],
            nodes=[_node_to_model(n) for n in self.nodes],
        )

    def to_json(self) -> str:
        return dump_json(self.to_model())

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_model(cls, model: TraceModel) -> "Trace":
        trace = cls(model.nvars, [p.to_poly() for p in model.premultipliers])
        # loaded nodes are kept as given; verify_trace decides whether they hold
        trace.nodes = [_node_from_model(n) for n in model.nodes]
        return trace

    @classmethod
    def from_json(cls, text: str) -> "Trace":
        data = json.loads(text)
        if isinstance(data, list):
            nvars = data[0]["output"]["nvars"] if data else 1
            data = {"nvars": nvars, "premultipliers": [], "nodes": data}
        return cls.from_model(TraceModel.model_validate(data))


def _node_to_model(node: TraceNode) -> TraceNodeModel:
    return TraceNodeModel(
        id=node.id,
        kind=node.kind.value,
        inputs=list(node.inputs),
        output=PolyModel.from_poly(node.output),
        order=str(node.order),
        variables=list(node.variables) if node.variables else None,
        r=node.root,
        certificate=CertificateModel.from_certificate(node.certificate) if node.certificate else None,
        combination=[str(c) for c in node.combination] if node.combination is not None else None,
        note=node.note,
    )


def _node_from_model(model: TraceNodeModel) -> TraceNode:
    return TraceNode(
        id=model.id,
        kind=NodeKind(model.kind),
        inputs=tuple(model.inputs),
        output=model.output.to_poly(),
        order=Fraction(model.order),
        variables=tuple(model.variables or ()),
        root=model.r,
        certificate=model.certificate.to_certificate() if model.certificate else None,
        combination=tuple(Fraction(c) for c in model.combination) if model.combination is not None else None,
        note=model.note,
    )


# ---------------------------------------------------------------------------
# procedures


def register_premultiplier(p: Poly, trace: Trace, combination: Optional[Sequence] = None,
                           note: str = "") -> Multiplier:
    """Admit a germ vanishing at the origin as a pre-multiplier of order 1/2."""
    if p.nvars != trace.nvars:
        raise DimensionError(f"Pre-multiplier in {p.nvars} variables for a trace in {trace.nvars}")
    if p.constant_term != 0:
        raise DomainError(f"Pre-multiplier {p} does not vanish at the origin", procedure="pre-multiplier")
    coeffs = None
    if combination is not None:
        coeffs = tuple(Fraction(c) for c in combination)
        if _combination_value(coeffs, trace) != p:
            raise DomainError(f"Recorded combination does not reproduce {p}", procedure="pre-multiplier")
    node = TraceNode(len(trace), NodeKind.PRE, (), p, PRE_MULTIPLIER_ORDER, combination=coeffs, note=note)
    return trace.append(node)


def register_axiom(p: Poly, order: Fraction, trace: Trace, note: str = "") -> Multiplier:
    """Seed the trace with a multiplier known from elsewhere."""
    order = Fraction(order)
    if not 0 < order <= AXIOM_ORDER_CAP:
        raise DomainError(f"Axiom order must lie in (0, {AXIOM_ORDER_CAP}], got {order}", procedure="axiom")
    return trace.append(TraceNode(len(trace), NodeKind.AXIOM, (), p, order, note=note))


def apply_p1(ms: Sequence[Multiplier], trace: Trace, variables: Optional[Sequence[int]] = None,
             note: str = "") -> Multiplier:
    """Jacobian determinant of n multipliers; order min(1/2, orders)/2."""
    variables = tuple(variables) if variables is not None else tuple(range(1, trace.nvars + 1))
    if len(ms) != len(variables):
        raise DimensionError(f"P1 needs {len(variables)} multipliers, got {len(ms)}", procedure="P1")
    for m in ms:
        trace._check_handle(m)
    output = jacobian_det([m.poly for m in ms], variables)
    order = order_after_p1([m.order for m in ms])
    node = TraceNode(len(trace), NodeKind.P1, tuple(m.node for m in ms), output, order,
                     variables=variables, note=note)
    logger.info(f"P1 on nodes {node.inputs}: order {order}")
    return trace.append(node)


def apply_p2(g: Poly, ms: Sequence[Multiplier], trace: Trace, rng: Optional[RandomSource] = None, *,
             mu: Optional[Multiplicity] = None, max_power: Optional[int] = None,
             caps: Optional[ResourceCaps] = None, note: str = "") -> Multiplier:
    """Admit g once a power g^r lies in the ideal of the inputs; order min(orders)/r."""
    if not ms:
        raise DimensionError("P2 needs at least one multiplier", procedure="P2")
    for m in ms:
        trace._check_handle(m)
    try:
        root, certificate = radical_membership_power(g, [m.poly for m in ms], mu, max_power=max_power,
                                                     rng=rng, caps=caps)
    except NotInRadicalError as e:
        logger.error(f"P2 rejected {g}: {e}")
        raise NotInRadicalError(f"{g} is not in the radical of the inputs (certified up to exponent {e.exponent})",
                                exponent=e.exponent, procedure="P2")
    order = order_after_p2([m.order for m in ms], root)
    node = TraceNode(len(trace), NodeKind.P2, tuple(m.node for m in ms), g, order, root=root,
                     certificate=certificate, note=note)
    logger.info(f"P2 on nodes {node.inputs}: root {root}, order {order}")
    return trace.append(node)


# ---------------------------------------------------------------------------
# verification


@dataclass
class NodeCheck:
    node: int
    kind: str
    ok: bool
    reason: str = ""


@dataclass
class TraceReport:
    checks: List[NodeCheck] = field(default_factory=list)
    p1_steps: int = 0
    p2_steps: int = 0
    max_root: int = 0
    final_order: Optional[Fraction] = None
    unit_nodes: List[int] = field(default_factory=list)
    axiom_nodes: List[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def steps(self) -> int:
        return self.p1_steps + self.p2_steps

    @property
    def failures(self) -> List[int]:
        return [c.node for c in self.checks if not c.ok]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "steps": self.steps,
            "p1_steps": self.p1_steps,
            "p2_steps": self.p2_steps,
            "max_root": self.max_root,
            "final_order": str(self.final_order) if self.final_order is not None else None,
            "unit_nodes": self.unit_nodes,
            "axiom_nodes": self.axiom_nodes,
            "failures": self.failures,
            "nodes": [{"id": c.node, "kind": c.kind, "ok": c.ok, "reason": c.reason} for c in self.checks],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{"node": c.node, "kind": c.kind, "ok": c.ok, "reason": c.reason} for c in self.checks],
                            columns=["node", "kind", "ok", "reason"])


def _combination_value(coeffs: Sequence[Fraction], trace: Trace) -> Poly:
    if len(coeffs) != len(trace.premultipliers):
        raise DomainError(f"{len(coeffs)} coefficients for {len(trace.premultipliers)} pre-multipliers")
    total = Poly.zero(trace.nvars)
    for c, s in zip(coeffs, trace.premultipliers):
        if c:
            total = total + s.scale(c)
    return total


def _check_node(trace: Trace, index: int, node: TraceNode) -> str:
    """Empty string when the node re-verifies, otherwise the reason it does not."""
    if node.id != index:
        return f"id {node.id} at position {index}"
    if any(not 0 <= i < node.id for i in node.inputs):
        return "input does not precede the node"
    if node.output.nvars != trace.nvars:
        return "output lives in the wrong ring"
    if node.order <= 0:
        return "order is not positive"
    inputs = [trace.nodes[i] for i in node.inputs]

    if node.kind == NodeKind.PRE:
        if inputs:
            return "pre-multiplier with inputs"
        if node.output.constant_term != 0:
            return "pre-multiplier does not vanish at the origin"
        if node.order != PRE_MULTIPLIER_ORDER:
            return f"pre-multiplier order {node.order} != 1/2"
        if node.combination is not None:
            try:
                if _combination_value(node.combination, trace) != node.output:
                    return "combination does not reproduce the output"
            except DomainError as e:
                return str(e)
        return ""

    if node.kind == NodeKind.AXIOM:
        if inputs:
            return "axiom with inputs"
        if node.order > AXIOM_ORDER_CAP:
            return f"axiom order {node.order} > {AXIOM_ORDER_CAP}"
        if node.root is not None or node.certificate is not None or node.variables or node.combination is not None:
            return "axiom carries a procedure payload"
        return ""

    if not inputs:
        return f"{node.kind.value} node without inputs"
    expected_inputs = [i.output for i in inputs]

    if node.kind == NodeKind.P1:
        if len(node.variables) != len(inputs) or len(set(node.variables)) != len(node.variables):
            return "P1 arity does not match its variable set"
        if any(not 1 <= v <= trace.nvars for v in node.variables):
            return "P1 variable index out of range"
        if jacobian_det(expected_inputs, node.variables) != node.output:
            return "output is not the Jacobian determinant of the inputs"
        if node.order != order_after_p1([i.order for i in inputs]):
            return f"order {node.order} != {order_after_p1([i.order for i in inputs])}"
        return ""

    if node.kind == NodeKind.P2:
        cert = node.certificate
        if node.root is None or node.root < 1:
            return "P2 without a positive root order"
        if cert is None:
            return "P2 without a certificate"
        if tuple(cert.generators) != tuple(expected_inputs):
            return "certificate generators differ from the input outputs"
        if cert.target != node.output ** node.root:
            return "certificate target is not output^r"
        if not cert.verify():
            return "certificate identity does not hold"
        if node.order != order_after_p2([i.order for i in inputs], node.root):
            return f"order {node.order} != {order_after_p2([i.order for i in inputs], node.root)}"
        return ""

    return f"unknown node kind {node.kind}"


def verify_trace(trace: Trace) -> TraceReport:
    """Re-check every node from its inputs; failures are report entries."""
    report = TraceReport()
    for index, node in enumerate(trace.nodes):
        try:
            reason = _check_node(trace, index, node)
        except (DimensionError, DomainError, ValueError) as e:
            reason = f"check raised: {e}"
        report.checks.append(NodeCheck(index, node.kind.value, not reason, reason))
        if reason:
            logger.error(f"Trace node {index} failed verification: {reason}")
        if node.kind == NodeKind.P1:
            report.p1_steps += 1
        elif node.kind == NodeKind.P2:
            report.p2_steps += 1
            report.max_root = max(report.max_root, node.root or 0)
        elif node.kind == NodeKind.AXIOM:
            report.axiom_nodes.append(index)
        if node.output.is_constant() and not node.output.is_zero():
            report.unit_nodes.append(index)
    if trace.nodes:
        report.final_order = trace.nodes[-1].order
    logger.info(f"Verified trace: {len(trace.nodes)} nodes, {len(report.failures)} failures")
    return report
