import logging
import threading
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence
from uuid import uuid4

import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


@dataclass(frozen=True)
class RunRecord:
    round: int
    scheme: str
    seed: int
    selected_count: int
    mean_lambda: float
    cum_energy_J: float
    cum_delay_s: float
    train_loss: float
    test_loss: float
    test_acc: float
    theta: float
    gen_gap_diag: float


@dataclass(frozen=True)
class RunSummary:
    scheme: str
    seed: int
    final_test_acc: float
    final_test_loss: float
    total_energy_J: float
    total_delay_s: float
    theta: float
    selected_mean: float
    feasible: bool


RUN_RECORD_COLUMNS = tuple(f.name for f in fields(RunRecord))
SUMMARY_COLUMNS = tuple(f.name for f in fields(RunSummary))
SWEEP_COLUMNS = ("axis", "value", "scheme", "runs", "acc_mean", "acc_std", "phi_dispersion")


def records_filename(scheme: str, seed: int) -> str:
    return f"records_{scheme}_seed{seed}.csv"


def trace_filename(scheme: str, seed: int, kind: str | None = None) -> str:
    prefix = "trace" if kind is None else f"trace_{kind}"
    return f"{prefix}_{scheme}_seed{seed}.csv"


def _frame(rows: Sequence, columns: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) if not isinstance(r, dict) else r for r in rows], columns=list(columns))


class RunRecorder:
    """Writes per-run CSV files and, when a database URL is given, mirrors rows into SQL tables."""

    def __init__(self, output_dir, database_url=None):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.database_url = database_url
        self._lock = threading.Lock()
        # Setup database connection if provided
        if database_url:
            from sqlalchemy import create_engine
            from sqlalchemy.orm import sessionmaker
            from .models import Base

            self.engine = create_engine(database_url)
            Base.metadata.create_all(self.engine)
            Session = sessionmaker(bind=self.engine)
            self.session = Session()
        else:
            self.session = None

    def child(self, name: str) -> "RunRecorder":
        """Recorder for a subdirectory that shares this recorder's database session."""
        sub = RunRecorder(self.output_dir / name)
        sub.database_url = self.database_url
        sub.session = self.session
        sub._lock = self._lock
        if self.session:
            sub.engine = self.engine
        return sub

    def write_records(self, records: Sequence[RunRecord], scheme: str, seed: int) -> Path:
        path = self.output_dir / records_filename(scheme, seed)
        _frame(records, RUN_RECORD_COLUMNS).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        logger.debug(f"Wrote {len(records)} run records to {path}")
        return path

    def write_trace(self, trace_rows: Sequence, row_type: type, scheme: str, seed: int,
                    kind: str | None = None) -> Path:
        """One CSV row per optimizer step; ``row_type`` fixes the header even when there are no rows."""
        path = self.output_dir / trace_filename(scheme, seed, kind)
        columns = [f.name for f in fields(row_type)]
        _frame(trace_rows, columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        logger.debug(f"Wrote {len(trace_rows)} trace rows to {path}")
        return path

    def write_summaries(self, summaries: Sequence[RunSummary], name: str = "summary.csv") -> Path:
        path = self.output_dir / name
        _frame(summaries, SUMMARY_COLUMNS).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        logger.info(f"Wrote {len(summaries)} summary rows to {path}")
        return path

    def write_sweep(self, rows: Iterable[dict], name: str = "sweep.csv") -> Path:
        path = self.output_dir / name
        _frame(list(rows), SWEEP_COLUMNS).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        logger.info(f"Wrote sweep summary to {path}")
        return path

    def persist_run(self, records: Sequence[RunRecord], summary: RunSummary) -> str | None:
        """Mirror one run into the database; returns the run id, or None without a database."""
        if not self.session:
            return None
        from .models import RunRecordRow, RunSummaryRow

        run_id = uuid4().hex
        with self._lock:
            self.session.add_all([RunRecordRow(run_id=run_id, **asdict(r)) for r in records])
            self.session.add(RunSummaryRow(run_id=run_id, **asdict(summary)))
            self.session.commit()
        logger.debug(f"Persisted run {run_id} ({summary.scheme}, seed {summary.seed})")
        return run_id

    def close(self):
        if self.session:
            self.session.close()
            self.engine.dispose()
