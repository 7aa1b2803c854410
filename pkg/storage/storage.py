"""Archive of identity and check reports (JSON lines -> SQLite)."""
import hashlib
import json
import logging
import os
from typing import Iterable, Tuple, Union

import pandas as pd
from sqlalchemy import case, func
from sqlalchemy.exc import IntegrityError
from sqlalchemy.orm import Session

from algebra.connection import IdentityReport
from core.errors import InvalidParams
from core.reports import CheckReport
from storage.db import ReportRecord

logger = logging.getLogger(__name__)

BATCH_SIZE = 100

Report = Union[IdentityReport, CheckReport]


def _digest(line: str) -> str:
    canonical = json.dumps(json.loads(line), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _record(report: Report, digest: str) -> ReportRecord:
    if isinstance(report, IdentityReport):
        return ReportRecord(
            digest=digest,
            kind="identity",
            name=report.identity,
            n=report.n,
            k=report.k,
            j=report.j,
            params=json.dumps(report.values, sort_keys=True),
            residual=str(report.residual),
            tolerance=None,
            passed=report.passed,
        )
    return ReportRecord(
        digest=digest,
        kind="check",
        name=report.check,
        params=json.dumps(report.params, sort_keys=True, default=str),
        residual=str(report.residual),
        tolerance=report.tolerance,
        passed=report.passed,
    )


def _parse_line(line: str) -> Report:
    data = json.loads(line)
    if "identity" in data:
        return IdentityReport.model_validate(data)
    if "check" in data:
        return CheckReport.model_validate(data)
    raise InvalidParams("report line has neither 'identity' nor 'check'")


def _commit(session: Session, added: int, skipped: int, pending: int) -> Tuple[int, int, int]:
    try:
        session.commit()
        return added + pending, skipped, 0
    except IntegrityError:
        session.rollback()
        logger.warning(f"batch of {pending} reports collided with archived rows; rolled back")
        return added, skipped + pending, 0


def store_reports(reports: Iterable[Report], session: Session) -> Tuple[int, int]:
    """Inserts reports, skipping any whose canonical JSON is already archived."""
    added = skipped = 0

    # Pre-fetch existing digests for fast deduplication
    existing = {d for (d,) in session.query(ReportRecord.digest).all()}
    logger.debug(f"{len(existing)} reports already archived")

    pending = 0
    for report in reports:
        digest = _digest(report.to_json())
        if digest in existing:
            skipped += 1
            continue
        session.add(_record(report, digest))
        existing.add(digest)
        pending += 1
        if pending == BATCH_SIZE:
            added, skipped, pending = _commit(session, added, skipped, pending)
    added, skipped, _ = _commit(session, added, skipped, pending)
    logger.info(f"archived {added} reports, skipped {skipped} duplicates")
    return added, skipped


def ingest_report_file(path: str, session: Session) -> Tuple[int, int]:
    """Stores each JSON line of a report file written by ``check``; malformed lines are skipped."""
    if not os.path.exists(path):
        raise InvalidParams(f"report file {path} not found")

    reports, malformed = [], 0
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                reports.append(_parse_line(line))
            except (json.JSONDecodeError, ValueError) as e:
                malformed += 1
                logger.warning(f"{path}:{lineno}: skipping malformed report ({e})")
    added, skipped = store_reports(reports, session)
    return added, skipped + malformed


def summarize(session: Session) -> pd.DataFrame:
    """One row per (kind, name): number of archived runs and of failures."""
    rows = (
        session.query(
            ReportRecord.kind,
            ReportRecord.name,
            func.count(ReportRecord.id),
            func.sum(case((ReportRecord.passed.is_(False), 1), else_=0)),
        )
        .group_by(ReportRecord.kind, ReportRecord.name)
        .order_by(ReportRecord.kind, ReportRecord.name)
        .all()
    )
    return pd.DataFrame(rows, columns=["kind", "name", "runs", "failures"])
