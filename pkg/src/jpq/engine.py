"""Query execution: match, filter, resolve, restructure, build.

The engine owns a document registry; `run` takes a parsed query and returns
the constructed Value, `explain` describes the plan (matching term, backbone,
inferred route).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import ast as A
from .construct import backbone, build, build_empty
from .errors import UnknownDocumentError
from .filtering import filter_result, resolve_options
from .matching import MatchResult, Matcher, MTuple, MUnit, succeeded
from .model import DocRegistry, Value
from .rewrite import (
    Constraint,
    RewriteRoute,
    Transformer,
    infer_route,
    project_result,
    replay,
)
from .terms import Term, TupleT, is_unit, project, render, var_set


@dataclass
class Plan:
    source_term: Term
    target_term: Term
    route: RewriteRoute

    def describe(self) -> str:
        lines = [
            f"matching term: {render(self.source_term)}",
            f"backbone:      {render(self.target_term)}",
        ]
        if self.route:
            lines.append("route:")
            for i, step in enumerate(self.route, 1):
                lines.append(f"  {i}. {step.describe()}")
        else:
            lines.append("route:         (no restructuring needed)")
        return "\n".join(lines)


class Engine:
    def __init__(self, registry: Optional[DocRegistry] = None):
        self.registry = registry or DocRegistry()

    def plan(self, q: A.QueryAst) -> Plan:
        A.validate_query(q)
        source = A.query_matching_term(q)
        target = backbone(q.construct)
        route = infer_route(source, target)
        return Plan(source, target, route)

    def _match(self, q: A.QueryAst) -> tuple[Term, MatchResult]:
        source = A.query_matching_term(q)
        matcher = Matcher()
        parts = []
        for name, pattern in q.sources:
            doc = self.registry.lookup(name)
            parts.append((A.derive_matching_term(pattern), matcher.match_value(pattern, doc)))
        kept = []
        for t, r in parts:
            if is_unit(t):
                continue
            if isinstance(t, TupleT) and isinstance(r, MTuple):
                kept.extend(r.items)
            else:
                kept.append(r)
        failed = any(not succeeded(r) for _, r in parts)
        if not kept:
            combined: MatchResult = MUnit()
        elif len(kept) == 1:
            combined = kept[0]
        else:
            combined = MTuple(kept)
        if failed:
            from .matching import MFailed

            combined = MFailed()
        return source, combined

    def run(self, q: A.QueryAst) -> Value:
        A.validate_query(q)
        plan = self.plan(q)
        source, result = self._match(q)
        if not succeeded(result):
            return build_empty(q.construct)
        constraints: list[Constraint] = []
        if q.where is not None:
            result = filter_result(result, source, q.where, constraints)
            if not succeeded(result):
                return build_empty(q.construct)
        result = resolve_options(result)
        if not succeeded(result):
            return build_empty(q.construct)
        keep = var_set(plan.target_term)
        projected_term = project(source, keep)
        projected = project_result(result, source, keep)
        transformer = Transformer(constraints)
        transformed = transformer.transform(projected, projected_term, plan.route)
        final_term = replay(projected_term, plan.route)
        return build(q.construct, final_term, transformed)

    def explain(self, q: A.QueryAst) -> str:
        return self.plan(q).describe()
