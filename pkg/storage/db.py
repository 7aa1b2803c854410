import os
from datetime import datetime, timezone

from sqlalchemy import Boolean, Column, DateTime, Float, Integer, String, Text, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

# Archive location relative to the project root; override with QHARNESS_DB_URL
DEFAULT_DB_URL = os.environ.get("QHARNESS_DB_URL", "sqlite:///./data/reports.db")

Base = declarative_base()


class ReportRecord(Base):
    __tablename__ = "reports"

    id = Column(Integer, primary_key=True, index=True)
    digest = Column(String(64), unique=True, index=True)
    kind = Column(String)  # "identity" or "check"
    name = Column(String, index=True)
    n = Column(Integer, nullable=True)
    k = Column(Integer, nullable=True)
    j = Column(Integer, nullable=True)
    params = Column(Text)  # JSON text
    residual = Column(String)  # exact rational or float repr
    tolerance = Column(Float, nullable=True)
    passed = Column(Boolean)
    created_at = Column(DateTime, default=lambda: datetime.now(timezone.utc))


def get_engine(url: str = DEFAULT_DB_URL):
    if url.startswith("sqlite:///./"):
        os.makedirs(os.path.dirname(url[len("sqlite:///"):]) or ".", exist_ok=True)
    # check_same_thread is only understood by SQLite
    connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
    engine = create_engine(url, connect_args=connect_args)
    Base.metadata.create_all(bind=engine)
    return engine


def get_session_factory(engine):
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)


if __name__ == "__main__":
    get_engine()
    print(f"Report archive initialized at {DEFAULT_DB_URL}.")
