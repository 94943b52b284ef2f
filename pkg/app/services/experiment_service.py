import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError
from sqlalchemy.orm import Session

from app.db.database import SessionLocal, init_db, session_scope
from app.exceptions import InvalidParametersError, WLError
from app.models.experiment import ExperimentRun
from app.models.graph import ColoredGraph
from app.models.schemas import (
    ExperimentRecord, FamilyKind, FamilySpec, InstanceFailure,
    RefinementVariant, SweepAggregate, SweepReport,
)
from app.services.generator_service import GeneratorService
from app.services.refinement_service import RefinementService

logger = logging.getLogger(__name__)

# iterations * log2(n) / n^2
RATIO_LOG = "iter_log_n_over_n2"
# iterations / (2^t * n), class-bounded families only
RATIO_CLASS = "iter_over_2t_n"

CSV_COLUMNS = [
    "n", "family", "seed", "variant", "iterations", RATIO_LOG, RATIO_CLASS, "wall_time_ms",
    "wl1_iterations", "vertex_classes_final", "edge_classes_final",
]


def _run_instance(task: Tuple[FamilySpec, RefinementVariant]) -> Union[ExperimentRecord, InstanceFailure]:
    spec, variant = task
    try:
        return ExperimentService.run_family(spec, variant)
    except (WLError, ValidationError) as e:
        detail = e.detail if isinstance(e, WLError) else str(e)
        return InstanceFailure(n=spec.n or 0, seed=spec.seed, detail=str(detail))


class ExperimentService:
    """Single-run records, sweeps and their CSV form"""

    @staticmethod
    def bound_ratios(n: int, iterations: int, t: Optional[int] = None) -> dict:
        ratios = {RATIO_LOG: iterations * math.log2(n) / (n * n) if n >= 2 else 0.0}
        if t is not None:
            ratios[RATIO_CLASS] = iterations / (2 ** t * n)
        return ratios

    @staticmethod
    def run_record(g: ColoredGraph, variant: RefinementVariant, family: str = "file",
                   params: Optional[dict] = None, seed: Optional[int] = None,
                   source: Optional[str] = None, t: Optional[int] = None) -> ExperimentRecord:
        """Stabilize g, timing the run, and package the result"""
        started = time.perf_counter()
        result = RefinementService.stabilize(g, variant)
        elapsed = (time.perf_counter() - started) * 1000
        wl1 = RefinementService.wl1_stabilize(g)
        stable = result.stable_graph
        return ExperimentRecord(
            family=family,
            params=params or {},
            source=source,
            variant=variant,
            n=g.n,
            seed=seed,
            iterations=result.iterations,
            wl1_iterations=wl1.iterations,
            vertex_classes_final=stable.vertex_class_count(),
            edge_classes_final=stable.edge_class_count(),
            wall_time_ms=round(elapsed, 3),
            bound_ratios=ExperimentService.bound_ratios(g.n, result.iterations, t),
        )

    @staticmethod
    def run_family(spec: FamilySpec, variant: RefinementVariant) -> ExperimentRecord:
        g = GeneratorService.generate(spec)
        t = spec.t if spec.family is FamilyKind.BOUNDED_COLOR_CLASS else None
        return ExperimentService.run_record(g, variant, family=spec.family.value, params=spec.params(),
                                            seed=spec.seed, t=t)

    @staticmethod
    def sweep(family: FamilyKind, ns: Sequence[int], variant: RefinementVariant = RefinementVariant.COUNTING,
              repetitions: int = 1, seed: int = 0, p: Optional[float] = None, t: Optional[int] = None,
              cycles: Optional[int] = None, jobs: int = 1) -> SweepReport:
        """One record per (n, repetition); failures are recorded and skipped"""
        if repetitions < 1:
            raise InvalidParametersError("repetitions must be at least 1")
        if not ns:
            raise InvalidParametersError("A sweep needs at least one n")
        try:
            tasks = [(FamilySpec(family=family, n=n, p=p, t=t, cycles=cycles, seed=seed + rep), variant)
                     for n in ns for rep in range(repetitions)]
        except ValidationError as e:
            raise InvalidParametersError(f"Invalid sweep parameters: {str(e)}")
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(_run_instance, tasks))
        else:
            outcomes = [_run_instance(task) for task in tasks]

        records = [o for o in outcomes if isinstance(o, ExperimentRecord)]
        failures = [o for o in outcomes if isinstance(o, InstanceFailure)]
        for failure in failures:
            logger.warning("Skipping instance n=%d seed=%d: %s", failure.n, failure.seed, failure.detail)
        records.sort(key=lambda r: (r.n, r.seed if r.seed is not None else 0))
        logger.info("Sweep over %s: %d records, %d failures", family.value, len(records), len(failures))
        return SweepReport(records=records, aggregates=ExperimentService.aggregate(records), failures=failures)

    @staticmethod
    def aggregate(records: Iterable[ExperimentRecord]) -> List[SweepAggregate]:
        """Max/mean iterations and max bound ratios per n"""
        by_n = {}
        for record in records:
            by_n.setdefault(record.n, []).append(record)
        aggregates = []
        for n in sorted(by_n):
            group = by_n[n]
            iterations = [r.iterations for r in group]
            keys = sorted({k for r in group for k in r.bound_ratios})
            aggregates.append(SweepAggregate(
                n=n,
                instances=len(group),
                max_iterations=max(iterations),
                mean_iterations=sum(iterations) / len(iterations),
                max_ratios={k: max(r.bound_ratios.get(k, 0.0) for r in group) for k in keys},
            ))
        return aggregates

    @staticmethod
    def to_csv(records: Iterable[ExperimentRecord]) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for record in records:
            writer.writerow({
                "n": record.n,
                "family": record.family,
                "seed": "" if record.seed is None else record.seed,
                "variant": record.variant.value,
                "iterations": record.iterations,
                RATIO_LOG: record.bound_ratios.get(RATIO_LOG, ""),
                RATIO_CLASS: record.bound_ratios.get(RATIO_CLASS, ""),
                "wall_time_ms": record.wall_time_ms,
                "wl1_iterations": "" if record.wl1_iterations is None else record.wl1_iterations,
                "vertex_classes_final": record.vertex_classes_final,
                "edge_classes_final": record.edge_classes_final,
            })
        return buffer.getvalue()


class ExperimentStore:
    """Persisted experiment records"""

    def __init__(self, session_factory: Optional[Callable[[], Session]] = None):
        self.session_factory = session_factory or SessionLocal
        init_db(self.session_factory.kw["bind"])

    def save(self, records: Iterable[ExperimentRecord]) -> int:
        """Insert records in one transaction; returns how many were written"""
        count = 0
        with session_scope(self.session_factory) as db:
            for record in records:
                db.add(ExperimentRun(
                    family=record.family,
                    source=record.source,
                    variant=record.variant.value,
                    n=record.n,
                    seed=record.seed,
                    params=record.params,
                    iterations=record.iterations,
                    wl1_iterations=record.wl1_iterations,
                    vertex_classes_final=record.vertex_classes_final,
                    edge_classes_final=record.edge_classes_final,
                    wall_time_ms=record.wall_time_ms,
                    bound_ratios=record.bound_ratios,
                ))
                count += 1
        return count

    def list_runs(self, family: Optional[str] = None, n: Optional[int] = None,
                  limit: Optional[int] = None) -> List[ExperimentRecord]:
        """Stored runs, oldest first, optionally filtered by family and n"""
        with session_scope(self.session_factory) as db:
            query = db.query(ExperimentRun)
            if family is not None:
                query = query.filter(ExperimentRun.family == family)
            if n is not None:
                query = query.filter(ExperimentRun.n == n)
            query = query.order_by(ExperimentRun.id)
            if limit is not None:
                query = query.limit(limit)
            return [ExperimentRecord(
                family=row.family,
                params=row.params or {},
                source=row.source,
                variant=RefinementVariant(row.variant),
                n=row.n,
                seed=row.seed,
                iterations=row.iterations,
                wl1_iterations=row.wl1_iterations,
                vertex_classes_final=row.vertex_classes_final,
                edge_classes_final=row.edge_classes_final,
                wall_time_ms=row.wall_time_ms,
                bound_ratios=row.bound_ratios or {},
            ) for row in query.all()]
