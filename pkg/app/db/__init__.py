from .database import get_db, init_db, session_scope

__all__ = ["get_db", "init_db", "session_scope"]
