from __future__ import annotations

import uuid
from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import relationship

from backend.db import Base


def generate_uuid() -> str:
    return str(uuid.uuid4())


class ExperimentRun(Base):
    __tablename__ = "experiment_runs"

    id = Column(String, primary_key=True, default=generate_uuid)
    kind = Column(String, nullable=False)
    seed = Column(Integer, nullable=False)
    config_text = Column(Text, default="")
    output_dir = Column(String, default="")
    status = Column(String, default="done")
    tool_version = Column(String, default="")
    wall_time = Column(Float, default=0)
    checks_text = Column(Text, default="")
    created_at = Column(DateTime, default=datetime.utcnow)

    rows = relationship(
        "ExperimentRow",
        back_populates="run",
        cascade="all, delete-orphan",
        passive_deletes=True,
        order_by="ExperimentRow.position",
    )


class ExperimentRow(Base):
    __tablename__ = "experiment_rows"

    id = Column(Integer, primary_key=True)
    run_id = Column(String, ForeignKey("experiment_runs.id", ondelete="CASCADE"), nullable=False)
    position = Column(Integer, default=0)
    experiment = Column(String, default="")
    n = Column(Integer, nullable=True)
    m = Column(String, default="")
    scaling = Column(String, default="")
    estimate = Column(Float, nullable=True)
    std_error = Column(Float, nullable=True)
    limit = Column(Float, nullable=True)
    rel_error = Column(Float, nullable=True)
    seed = Column(Integer, nullable=True)

    run = relationship("ExperimentRun", back_populates="rows")
