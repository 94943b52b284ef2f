from sqlalchemy import Column, Integer, String, Float, DateTime, JSON
from sqlalchemy.orm import declarative_base
from datetime import datetime
import pytz

Base = declarative_base()


def get_utc_time():
    """Get current time in UTC"""
    return datetime.now(pytz.utc)


class ExperimentRun(Base):
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, index=True, autoincrement=True)
    family = Column(String(50), nullable=False, index=True)  # generator family or "file"
    source = Column(String, nullable=True)  # input file reference when not generated
    variant = Column(String(20), nullable=False)  # counting, converse-aware, set
    n = Column(Integer, nullable=False, index=True)
    seed = Column(Integer, nullable=True)
    params = Column(JSON, nullable=False, default=dict)
    iterations = Column(Integer, nullable=False)
    wl1_iterations = Column(Integer, nullable=True)
    vertex_classes_final = Column(Integer, nullable=False)
    edge_classes_final = Column(Integer, nullable=False)
    wall_time_ms = Column(Float, nullable=False)
    bound_ratios = Column(JSON, nullable=False, default=dict)
    created_at = Column(DateTime(timezone=True), default=get_utc_time)
