import json

import pytest
from sqlalchemy.exc import IntegrityError

from database.models import ExperimentRun, RunEvent
from harness.errors import ConfigError
from harness.jobs import BaselineJob, EvalJob, GenJob, TraceJob, TrainJob


def _events(db, run_id):
    return [e.event for e in db.query(RunEvent).filter_by(run_id=run_id).order_by(RunEvent.created_at)]


class TestRunLedger:
    def test_training_run_is_recorded(self, db_session, features_config):
        result = TrainJob(db_session, features_config).execute(trigger="test")
        assert result["success"]
        run = db_session.get(ExperimentRun, result["run_id"])
        assert run.status == "completed"
        assert run.job_name == "train"
        assert run.task == "features"
        assert run.config_digest == features_config.digest()
        assert run.seed == features_config.seed
        assert run.updates_completed == features_config.updates
        assert run.episodes_processed == features_config.updates * features_config.batch_size
        assert run.completed_at >= run.started_at
        events = _events(db_session, run.id)
        assert events.count("metrics_flushed") == features_config.updates
        assert "checkpoint_saved" in events

    def test_failed_run_keeps_the_error(self, db_session, features_config):
        config = features_config.updated(features_csv="missing.csv")
        result = TrainJob(db_session, config).execute(trigger="test")
        assert not result["success"]
        run = db_session.get(ExperimentRun, result["run_id"])
        assert run.status == "failed"
        assert run.error_message.startswith(result["error_type"])
        assert "Traceback" in run.error_traceback

    def test_resume_is_logged(self, db_session, features_config, tmp_path):
        TrainJob(db_session, features_config.updated(updates=1)).execute(trigger="test")
        result = TrainJob(db_session, features_config, resume=tmp_path / "model.isk").execute(trigger="test")
        run = db_session.get(ExperimentRun, result["run_id"])
        assert run.updates_completed == 1
        event = run.events.filter_by(event="resumed").one()
        assert json.loads(event.details)["update"] == 1

    def test_unknown_trigger_is_rejected(self, db_session):
        db_session.add(ExperimentRun(job_name="train", status="running", trigger="cron"))
        with pytest.raises(IntegrityError):
            db_session.commit()
        db_session.rollback()


class TestJobs:
    def test_eval_and_trace_jobs(self, db_session, mnist_config, tmp_path):
        assert TrainJob(db_session, mnist_config).execute(trigger="test")["success"]
        report = EvalJob(db_session, tmp_path / "model.isk", 3, "greedy", tmp_path / "eval.csv").execute("test")
        assert report["success"]
        assert report["result"]["episodes"] == 3
        assert (tmp_path / "eval.csv").exists()

        traced = TraceJob(db_session, tmp_path / "model.isk", 2, tmp_path / "traces").execute("test")
        assert traced["success"]
        assert traced["result"]["episodes"] == 2
        assert (tmp_path / "traces" / "episode0001" / "trace.jsonl").exists()

        runs = db_session.query(ExperimentRun).order_by(ExperimentRun.started_at).all()
        assert [r.job_name for r in runs] == ["train", "eval", "trace"]
        assert runs[1].episodes_processed == 3

    def test_eval_with_other_experiment_config(self, db_session, features_config, tmp_path):
        TrainJob(db_session, features_config).execute(trigger="test")
        with pytest.raises(ConfigError):
            EvalJob(db_session, tmp_path / "model.isk", 2, "greedy", tmp_path / "r.csv",
                    config=features_config.updated(gamma=0.9))

    def test_random_baseline_on_hangman(self, db_session, hangman_config, tmp_path):
        result = BaselineJob(db_session, "random", hangman_config).execute(trigger="test")
        assert result["success"]
        assert (tmp_path / "baseline-random-metrics.csv").exists()
        assert (tmp_path / "baseline-random.isk").exists()
        assert (tmp_path / "baseline-random-report.csv").exists()
        assert result["result"]["kind"] == "random"

    def test_full_observation_baseline(self, db_session, features_config, tmp_path):
        result = BaselineJob(db_session, "full", features_config).execute(trigger="test")
        assert result["success"]
        assert (tmp_path / "baseline-full-report.csv").exists()

    def test_frequency_baseline_needs_a_corpus(self, db_session, features_config):
        result = BaselineJob(db_session, "freq", features_config).execute(trigger="test")
        assert not result["success"]
        assert result["error_type"] == "ConfigError"

    def test_unknown_baseline(self, db_session, features_config):
        with pytest.raises(ConfigError):
            BaselineJob(db_session, "oracle", features_config)

    def test_gen_cluttered(self, db_session, mnist_files, tmp_path):
        result = GenJob(db_session, "cluttered", 2, 4, tmp_path / "gen", preset="cluttered52").execute("test")
        assert result["success"]
        lines = (tmp_path / "gen" / "index.jsonl").read_text().splitlines()
        record = json.loads(lines[0])
        assert record["file"] == "cluttered00000.pgm"
        assert "digit_offset" in record
