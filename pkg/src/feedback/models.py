from sqlalchemy import Boolean, Column, DateTime, Float, Integer, String
from sqlalchemy.ext.declarative import declarative_base
from datetime import datetime

Base = declarative_base()


class RunRecordRow(Base):
    __tablename__ = 'run_records'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String, nullable=False, index=True)
    round = Column(Integer, nullable=False)
    scheme = Column(String, nullable=False)
    seed = Column(Integer, nullable=False)
    selected_count = Column(Integer, nullable=False)
    mean_lambda = Column(Float, nullable=False)
    cum_energy_J = Column(Float, nullable=False)
    cum_delay_s = Column(Float, nullable=False)
    train_loss = Column(Float, nullable=False)
    test_loss = Column(Float, nullable=False)
    test_acc = Column(Float, nullable=False)
    theta = Column(Float, nullable=False)
    gen_gap_diag = Column(Float, nullable=False)
    timestamp = Column(DateTime, default=datetime.utcnow)


class RunSummaryRow(Base):
    __tablename__ = 'run_summaries'

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String, nullable=False, unique=True)
    scheme = Column(String, nullable=False)
    seed = Column(Integer, nullable=False)
    final_test_acc = Column(Float, nullable=False)
    final_test_loss = Column(Float, nullable=False)
    total_energy_J = Column(Float, nullable=False)
    total_delay_s = Column(Float, nullable=False)
    theta = Column(Float, nullable=False)
    selected_mean = Column(Float, nullable=False)
    feasible = Column(Boolean, nullable=False)
    timestamp = Column(DateTime, default=datetime.utcnow)
