import os
from contextlib import contextmanager

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

from app.config import DATABASE_URL
from app.models.experiment import Base

engine = create_engine(DATABASE_URL)

SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)


def init_db(bind=None):
    """Initialize database tables, creating the sqlite directory if needed"""
    bind = bind or engine
    url = bind.url
    if url.get_backend_name() == "sqlite" and url.database and url.database != ":memory:":
        directory = os.path.dirname(os.path.abspath(url.database))
        os.makedirs(directory, exist_ok=True)
    Base.metadata.create_all(bind=bind)


def get_db(session_factory=None):
    """Session with transaction management: commit on success, rollback on error"""
    db = (session_factory or SessionLocal)()
    try:
        yield db
        db.commit()  # Commit if no exception
    except Exception:
        db.rollback()  # Rollback on any exception
        raise
    finally:
        db.close()


# Context-manager form of get_db for code outside a request/dependency cycle
session_scope = contextmanager(get_db)
