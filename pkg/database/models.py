"""SQLAlchemy models for the experiment run ledger."""
import uuid
from datetime import datetime, timezone

from sqlalchemy import CheckConstraint, Column, DateTime, ForeignKey, Index, Integer, String, Text
from sqlalchemy.orm import declarative_base, relationship

Base = declarative_base()


def generate_uuid():
    """Generate a lowercase hex UUID."""
    return uuid.uuid4().hex


def utcnow():
    return datetime.now(timezone.utc).replace(tzinfo=None)


# Enums as string literals for SQLite compatibility
JOB_NAMES = ('train', 'eval', 'trace', 'gen', 'baseline', 'selftest')

RUN_STATUSES = ('running', 'completed', 'failed')

TRIGGERS = ('cli', 'test')


class ExperimentRun(Base):
    """One invocation of a job."""
    __tablename__ = 'experiment_runs'

    id = Column(String(32), primary_key=True, default=generate_uuid)

    # Run Info
    job_name = Column(String(20), nullable=False)
    task = Column(String(50))
    config_digest = Column(String(64))
    seed = Column(Integer)

    # Timing
    started_at = Column(DateTime, nullable=False, default=utcnow)
    completed_at = Column(DateTime)

    # Results
    status = Column(String(20), nullable=False, default='running')
    updates_completed = Column(Integer, default=0)
    episodes_processed = Column(Integer, default=0)

    # Errors
    error_message = Column(Text)
    error_traceback = Column(Text)

    # Metadata
    trigger = Column(String(20))

    # Relationships
    events = relationship("RunEvent", back_populates="run", lazy="dynamic")

    __table_args__ = (
        CheckConstraint(f"job_name IN {JOB_NAMES}"),
        CheckConstraint(f"status IN {RUN_STATUSES}"),
        CheckConstraint(f"\"trigger\" IN {TRIGGERS}"),
        Index('idx_experiment_runs_job_name', 'job_name'),
        Index('idx_experiment_runs_started_at', 'started_at'),
    )


class RunEvent(Base):
    """Notable things that happened during a run."""
    __tablename__ = 'run_events'

    id = Column(String(32), primary_key=True, default=generate_uuid)
    run_id = Column(String(32), ForeignKey('experiment_runs.id'), nullable=False)

    event = Column(String(100), nullable=False)
    details = Column(Text)  # JSON blob

    created_at = Column(DateTime, nullable=False, default=utcnow)

    run = relationship("ExperimentRun", back_populates="events")

    __table_args__ = (
        Index('idx_run_events_run_id', 'run_id'),
        Index('idx_run_events_event', 'event'),
    )
