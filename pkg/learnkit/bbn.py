"""Tree-structured discrete Bayesian belief networks.

Network text format::

    # comment
    node A states 0,1
    node B states 0,1
    parent B A
    cpt A
    given - : 0.7,0.3
    cpt B
    given 0 : 0.8,0.2
    given 1 : 0.1,0.9

Each node has at most one parent, so the network is a forest and Pearl's
lambda/pi message passing gives exact posteriors.
"""

import logging
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .config import DEFAULT_MAX_JOINT_STATES
from .errors import DataError, ImpossibleEvidenceError, NetworkFormatError

logger = logging.getLogger(__name__)

CPT_TOLERANCE = 1e-9

ROOT_GIVEN = "-"

Evidence = Mapping[str, str]


@dataclass(frozen=True, eq=False)
class Node:
    """A discrete variable with its conditional probability table.

    ``cpt[u, x]`` is ``P(x | parent = u)``; roots have a single row.
    """

    name: str
    states: tuple[str, ...]
    parent: Optional[str]
    cpt: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "cpt", np.asarray(self.cpt, dtype=float))
        if len(self.states) < 2:
            raise NetworkFormatError(f"Node {self.name} needs at least two states")
        if len(set(self.states)) != len(self.states):
            raise NetworkFormatError(f"Node {self.name} repeats a state")
        if self.cpt.ndim != 2 or self.cpt.shape[1] != len(self.states):
            raise NetworkFormatError(f"CPT of node {self.name} has the wrong shape")
        if np.any(self.cpt < 0):
            raise NetworkFormatError(f"CPT of node {self.name} has a negative entry")
        sums = self.cpt.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > CPT_TOLERANCE):
            raise NetworkFormatError(
                f"CPT of node {self.name} is not normalised (row sums {sums.tolist()})"
            )

    def state_index(self, state: str) -> int:
        try:
            return self.states.index(state)
        except ValueError:
            raise DataError(f"Node {self.name} has no state {state!r}") from None


@dataclass(frozen=True, eq=False)
class Network:
    """A forest of nodes, each with at most one parent."""

    nodes: tuple[Node, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        names = [node.name for node in self.nodes]
        if len(set(names)) != len(names):
            raise NetworkFormatError("Node names must be unique")
        by_name = self.by_name
        for node in self.nodes:
            if node.parent is None:
                if node.cpt.shape[0] != 1:
                    raise NetworkFormatError(f"Root node {node.name} needs one CPT row")
                continue
            if node.parent not in by_name:
                raise NetworkFormatError(
                    f"Node {node.name} has unknown parent {node.parent}"
                )
            if node.cpt.shape[0] != len(by_name[node.parent].states):
                raise NetworkFormatError(
                    f"CPT of node {node.name} needs one row per state of {node.parent}"
                )
        self._check_acyclic()

    @property
    def by_name(self) -> dict[str, Node]:
        return {node.name: node for node in self.nodes}

    def children(self) -> dict[str, list[str]]:
        result: dict[str, list[str]] = {node.name: [] for node in self.nodes}
        for node in self.nodes:
            if node.parent is not None:
                result[node.parent].append(node.name)
        return result

    def roots(self) -> list[str]:
        return [node.name for node in self.nodes if node.parent is None]

    def _check_acyclic(self) -> None:
        by_name = self.by_name
        for node in self.nodes:
            seen = {node.name}
            current = node.parent
            while current is not None:
                if current in seen:
                    raise NetworkFormatError(f"cycle detected through node {current}")
                seen.add(current)
                current = by_name[current].parent

    def topological_order(self) -> list[str]:
        """Breadth-first order from the roots; parents precede children."""
        children = self.children()
        order = self.roots()
        for name in order:
            order.extend(children[name])
        return order

    @property
    def state_space_size(self) -> int:
        return int(np.prod([len(node.states) for node in self.nodes], dtype=object))


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Posterior distribution of every node."""

    beliefs: dict[str, np.ndarray]

    def of(self, node: str, state: str, net: Network) -> float:
        return float(self.beliefs[node][net.by_name[node].state_index(state)])


# Parsing


@dataclass
class _NodeDraft:
    name: str
    states: tuple[str, ...]
    line: int
    parent: Optional[str] = None
    rows: Optional[dict[str, list[float]]] = None


def _split_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def parse_network(text: str) -> Network:
    """Parse and validate a network description.

    Raises:
        NetworkFormatError: On syntax errors, unknown or repeated names, a
            node with two parents ("tree restriction violated"), cycles, or
            CPT rows that are incomplete or do not sum to one
    """
    drafts: dict[str, _NodeDraft] = {}
    current: Optional[_NodeDraft] = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        keyword = words[0]

        if keyword == "node":
            if len(words) != 4 or words[2] != "states":
                raise NetworkFormatError(
                    f"Line {lineno}: expected 'node NAME states s1,s2,...'"
                )
            name = words[1]
            if name in drafts:
                raise NetworkFormatError(f"Line {lineno}: duplicate node {name}")
            drafts[name] = _NodeDraft(name, tuple(_split_list(words[3])), lineno)
            current = None

        elif keyword == "parent":
            if len(words) != 3:
                raise NetworkFormatError(
                    f"Line {lineno}: tree restriction violated or malformed "
                    f"'parent NAME PARENT'"
                )
            child, parent = words[1], words[2]
            if child not in drafts:
                raise NetworkFormatError(f"Line {lineno}: unknown node {child}")
            if "," in parent or drafts[child].parent is not None:
                raise NetworkFormatError(
                    f"Line {lineno}: tree restriction violated: node {child} "
                    f"has more than one parent"
                )
            drafts[child].parent = parent
            current = None

        elif keyword == "cpt":
            if len(words) != 2 or words[1] not in drafts:
                raise NetworkFormatError(f"Line {lineno}: expected 'cpt NAME' of a declared node")
            current = drafts[words[1]]
            if current.rows is not None:
                raise NetworkFormatError(f"Line {lineno}: second cpt for node {current.name}")
            current.rows = {}

        elif keyword == "given":
            if current is None or current.rows is None:
                raise NetworkFormatError(f"Line {lineno}: 'given' outside a cpt block")
            head, sep, values = line[len("given"):].partition(":")
            given = head.strip()
            if not sep or not given:
                raise NetworkFormatError(f"Line {lineno}: expected 'given STATE : p1,p2,...'")
            if given in current.rows:
                raise NetworkFormatError(
                    f"Line {lineno}: repeated row {given!r} for node {current.name}"
                )
            try:
                current.rows[given] = [float(v) for v in _split_list(values)]
            except ValueError:
                raise NetworkFormatError(
                    f"Line {lineno}: probabilities of node {current.name} must be decimals"
                ) from None

        else:
            raise NetworkFormatError(f"Line {lineno}: unknown directive {keyword!r}")

    return Network(tuple(_build_node(draft, drafts) for draft in drafts.values()))


def _build_node(draft: _NodeDraft, drafts: dict[str, _NodeDraft]) -> Node:
    if draft.parent is not None and draft.parent not in drafts:
        raise NetworkFormatError(f"Node {draft.name} has unknown parent {draft.parent}")
    if draft.rows is None:
        raise NetworkFormatError(f"Node {draft.name} has no cpt")

    givens = [ROOT_GIVEN] if draft.parent is None else list(drafts[draft.parent].states)
    extra = set(draft.rows) - set(givens)
    if extra:
        raise NetworkFormatError(
            f"CPT of node {draft.name} has rows for unknown parent states {sorted(extra)}"
        )
    rows = []
    for given in givens:
        if given not in draft.rows:
            raise NetworkFormatError(f"CPT of node {draft.name} lacks the row 'given {given}'")
        row = draft.rows[given]
        if len(row) != len(draft.states):
            raise NetworkFormatError(
                f"CPT of node {draft.name}, row {given!r}: expected "
                f"{len(draft.states)} probabilities, found {len(row)}"
            )
        rows.append(row)
    return Node(draft.name, draft.states, draft.parent, np.array(rows))


def format_network(net: Network) -> str:
    """Write ``net`` in the text format accepted by :func:`parse_network`."""
    by_name = net.by_name
    lines = [f"node {node.name} states {','.join(node.states)}" for node in net.nodes]
    lines += [f"parent {node.name} {node.parent}" for node in net.nodes if node.parent]
    for node in net.nodes:
        lines.append(f"cpt {node.name}")
        givens = [ROOT_GIVEN] if node.parent is None else by_name[node.parent].states
        for given, row in zip(givens, node.cpt):
            lines.append(f"given {given} : {','.join(repr(float(p)) for p in row)}")
    return "\n".join(lines) + "\n"


# Evidence


def parse_evidence(text: str) -> dict[str, str]:
    """Parse ``"A=x,B=y"`` into a mapping; an empty string gives no evidence."""
    evidence: dict[str, str] = {}
    for item in _split_list(text):
        name, sep, state = item.partition("=")
        if not sep or not name.strip() or not state.strip():
            raise DataError(f"Invalid evidence item {item!r}; expected NAME=STATE")
        evidence[name.strip()] = state.strip()
    return evidence


def validate_evidence(net: Network, evidence: Evidence) -> dict[str, int]:
    """Check names and states; returns node name to observed state index."""
    by_name = net.by_name
    observed = {}
    for name, state in evidence.items():
        if name not in by_name:
            raise DataError(f"Evidence names unknown node {name}")
        observed[name] = by_name[name].state_index(state)
    return observed


def _indicator(node: Node, observed: dict[str, int]) -> np.ndarray:
    if node.name not in observed:
        return np.ones(len(node.states))
    vector = np.zeros(len(node.states))
    vector[observed[node.name]] = 1.0
    return vector


def _normalise(vector: np.ndarray, where: str) -> np.ndarray:
    total = float(np.sum(vector))
    if total <= 0.0:
        raise ImpossibleEvidenceError(f"impossible evidence (zero mass at {where})")
    return vector / total


# Inference


def propagate(net: Network, evidence: Optional[Evidence] = None) -> BeliefState:
    """Exact posteriors by Pearl's lambda/pi message passing on the forest.

    Upward pass: ``lambda(x)`` is the evidence indicator times the product
    of the children's lambda messages, and the message to the parent is
    ``lambda_X(u) = sum_x P(x | u) lambda(x)``. Downward pass: ``pi(x) =
    sum_u P(x | u) pi_X(u)`` and the message to child j is
    ``pi(x) * indicator(x) * prod_{k != j} lambda_k(x)``. Every message is
    normalised.

    Raises:
        DataError: On evidence naming unknown nodes or states
        ImpossibleEvidenceError: If the evidence has zero probability
    """
    observed = validate_evidence(net, evidence or {})
    by_name = net.by_name
    children = net.children()
    order = net.topological_order()

    lam: dict[str, np.ndarray] = {}
    lam_msg: dict[str, np.ndarray] = {}  # child -> message over parent states
    for name in reversed(order):
        node = by_name[name]
        value = _indicator(node, observed)
        for child in children[name]:
            value = value * lam_msg[child]
        lam[name] = value
        if node.parent is not None:
            lam_msg[name] = _normalise(node.cpt @ value, f"lambda message {name}")

    pi_msg: dict[str, np.ndarray] = {}  # child -> message over parent states
    beliefs: dict[str, np.ndarray] = {}
    for name in order:
        node = by_name[name]
        pi = node.cpt[0] if node.parent is None else pi_msg[name] @ node.cpt
        beliefs[name] = _normalise(pi * lam[name], f"node {name}")

        base = pi * _indicator(node, observed)
        for child in children[name]:
            message = base.copy()
            for other in children[name]:
                if other != child:
                    message = message * lam_msg[other]
            pi_msg[child] = _normalise(message, f"pi message {name}->{child}")

    return BeliefState({node.name: beliefs[node.name] for node in net.nodes})


def enumerate_joint(
    net: Network,
    evidence: Optional[Evidence] = None,
    max_states: int = DEFAULT_MAX_JOINT_STATES,
) -> BeliefState:
    """Exact posteriors by summing the full joint distribution.

    The joint tensor has one axis per node and is built by broadcasting
    every CPT; configurations inconsistent with the evidence are zeroed.

    Raises:
        DataError: If the state space exceeds ``max_states`` or evidence is invalid
        ImpossibleEvidenceError: If the evidence has zero probability
    """
    size = net.state_space_size
    if size > max_states:
        raise DataError(
            f"state space too large for enumeration: {size} > {max_states}"
        )
    observed = validate_evidence(net, evidence or {})
    axis = {node.name: i for i, node in enumerate(net.nodes)}
    ndim = len(net.nodes)
    joint = np.ones([len(node.states) for node in net.nodes])

    for node in net.nodes:
        shape = [1] * ndim
        shape[axis[node.name]] = len(node.states)
        if node.parent is None:
            factor = node.cpt[0].reshape(shape)
        else:
            shape[axis[node.parent]] = node.cpt.shape[0]
            cpt = node.cpt
            if axis[node.parent] > axis[node.name]:
                cpt = cpt.T
            factor = cpt.reshape(shape)
        joint = joint * factor

    for name, index in observed.items():
        mask = np.zeros(joint.shape[axis[name]])
        mask[index] = 1.0
        shape = [1] * ndim
        shape[axis[name]] = len(mask)
        joint = joint * mask.reshape(shape)

    total = float(joint.sum())
    if total <= 0.0:
        raise ImpossibleEvidenceError("impossible evidence (zero joint probability)")

    beliefs = {}
    for node in net.nodes:
        others = tuple(i for i in range(ndim) if i != axis[node.name])
        beliefs[node.name] = joint.sum(axis=others) / total
    return BeliefState(beliefs)


@dataclass(frozen=True)
class BeliefRow:
    node: str
    state: str
    initial: float
    revised: float


def belief_report(net: Network, evidence: Evidence) -> list[BeliefRow]:
    """Prior and posterior belief of every state, node by node."""
    initial = propagate(net)
    revised = propagate(net, evidence)
    rows = []
    for node in net.nodes:
        for i, state in enumerate(node.states):
            rows.append(
                BeliefRow(
                    node.name,
                    state,
                    float(initial.beliefs[node.name][i]),
                    float(revised.beliefs[node.name][i]),
                )
            )
    logger.debug("Belief report over %d nodes with %d observations", len(net.nodes), len(evidence))
    return rows
