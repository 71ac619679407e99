import logging
import os
import time

from dotenv import load_dotenv
from sqlalchemy import create_engine, event
from sqlalchemy.engine import Engine, make_url
from sqlalchemy.exc import OperationalError
from sqlalchemy.orm import declarative_base, scoped_session, sessionmaker

logger = logging.getLogger(__name__)

load_dotenv()

DEFAULT_DATABASE_URL = "sqlite:///instance/hullwalk.db"


def _build_database_url() -> str:
    return os.getenv("DATABASE_URL") or os.getenv("DB_URL") or DEFAULT_DATABASE_URL


DATABASE_URL = _build_database_url()

engine_kwargs = {"future": True, "pool_pre_ping": True}
if DATABASE_URL.startswith("sqlite"):
    engine_kwargs["connect_args"] = {"check_same_thread": False}

engine = create_engine(DATABASE_URL, **engine_kwargs)

SessionLocal = scoped_session(
    sessionmaker(bind=engine, autoflush=False, autocommit=False, future=True)
)

Base = declarative_base()


def _ensure_sqlite_directory() -> None:
    if not DATABASE_URL.startswith("sqlite"):
        return
    database = make_url(DATABASE_URL).database
    if not database or database == ":memory:":
        return
    directory = os.path.dirname(database)
    if directory:
        os.makedirs(directory, exist_ok=True)


def init_db() -> None:
    _ensure_sqlite_directory()
    import backend.models  # noqa: F401
    Base.metadata.create_all(bind=engine)


def drop_db() -> None:
    import backend.models  # noqa: F401
    Base.metadata.drop_all(bind=engine)


def commit_with_retry(session, retries: int = 5, base_delay: float = 0.05) -> None:
    attempt = 0
    while True:
        try:
            session.commit()
            return
        except OperationalError as exc:
            message = str(exc).lower()
            if "database is locked" not in message or attempt >= retries:
                raise
            session.rollback()
            delay = base_delay * (2**attempt)
            logger.warning("Database locked, retrying commit in %.2fs", delay)
            time.sleep(delay)
            attempt += 1


@event.listens_for(Engine, "connect")
def configure_sqlite(dbapi_connection, connection_record) -> None:
    if not DATABASE_URL.startswith("sqlite"):
        return
    cursor = dbapi_connection.cursor()
    cursor.execute("PRAGMA foreign_keys=ON")
    cursor.execute("PRAGMA journal_mode=WAL")
    cursor.execute("PRAGMA busy_timeout=5000")
    cursor.close()
