"""Ledger engine and session management."""
from functools import lru_cache
from typing import Iterator, Optional

from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker
from sqlalchemy.pool import StaticPool

from harness.settings import get_settings

SessionLocal = sessionmaker(autocommit=False, autoflush=False)


@lru_cache(maxsize=None)
def get_engine(url: Optional[str] = None, echo: Optional[bool] = None) -> Engine:
    """Engine for ``url`` (default: the configured ledger URL)."""
    settings = get_settings()
    url = url or settings.ledger_url
    echo = settings.ledger_echo if echo is None else echo

    # SQLite-specific configuration
    if url.startswith("sqlite"):
        engine = create_engine(
            url,
            connect_args={"check_same_thread": False},
            poolclass=StaticPool,
            echo=echo,
        )

        # Enable foreign keys for SQLite
        @event.listens_for(engine, "connect")
        def set_sqlite_pragma(dbapi_connection, connection_record):
            cursor = dbapi_connection.cursor()
            cursor.execute("PRAGMA foreign_keys=ON")
            cursor.close()
    else:
        engine = create_engine(url, echo=echo)
    return engine


def init_db(engine: Optional[Engine] = None) -> Engine:
    """Create ledger tables if missing."""
    from .models import Base
    engine = engine or get_engine()
    Base.metadata.create_all(bind=engine)
    return engine


def get_session(url: Optional[str] = None) -> Iterator[Session]:
    """Yield a session on an initialized ledger, rolling back on error."""
    db = SessionLocal(bind=init_db(get_engine(url)))
    try:
        yield db
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()
