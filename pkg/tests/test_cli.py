import json

import pytest

from config import Config, TestingConfig
from heis_imcf import cli
from heis_imcf.api.errors import ConfigError, EXIT_CONFIG, EXIT_OK, NonConvergedError, VerificationError
from heis_imcf.services.job_service import Job, JobResult, JobService, JobStatus, run_jobs
from heis_imcf.services.field_io import read_table_csv


def run(argv):
    return cli.main([str(a) for a in argv], config_class=TestingConfig)


def write_config(path, data):
    path.write_text(json.dumps(data))
    return path


@pytest.fixture
def barrier_config(tmp_path):
    return write_config(tmp_path / 'barrier.json', {
        'command': 'barrier', 'seed': 7, 'p': [1.5], 'eps': [1.0], 'R0': 1.0,
        'samples': 500, 'fd_samples': 5, 'sphere_samples': 50,
    })


@pytest.fixture
def echo_handlers(monkeypatch):
    def echo(payload):
        return {'value': payload['value'], 'passed': payload.get('passed', True)}

    def fail(payload):
        error = NonConvergedError("budget exhausted")
        error.partial = {'file': 'partial.json'}
        raise error

    monkeypatch.setitem(JobService._handlers, 'test.echo', echo)
    monkeypatch.setitem(JobService._handlers, 'test.fail', fail)


class TestCommands:

    def test_selftest_list(self, capsys, tmp_path):
        assert run(['selftest', '--list', '--out', tmp_path]) == EXIT_OK
        names = capsys.readouterr().out.split()
        assert 'group_axioms' in names
        assert not (tmp_path / 'timings.json').exists()

    def test_selftest_subset(self, tmp_path):
        config = write_config(tmp_path / 'selftest.json',
                              {'command': 'selftest', 'seed': 1, 'selftest': {'checks': ['group_axioms']}})
        assert run(['selftest', '--config', config, '--out', tmp_path]) == EXIT_OK
        report = json.loads((tmp_path / 'selftest.json').read_text())
        assert [c['name'] for c in report['checks']] == ['group_axioms']
        assert report['meta']['seed'] == 1
        assert (tmp_path / 'timings.json').exists()

    def test_schema(self, tmp_path):
        assert run(['schema', '--out', tmp_path]) == EXIT_OK
        schema = json.loads((tmp_path / 'run_config.schema.json').read_text())
        assert schema['title'] == 'heis-imcf run configuration'
        assert (tmp_path / 'verify_report.schema.json').exists()

    def test_missing_config_file(self, tmp_path, capsys):
        assert run(['solve', '--config', tmp_path / 'nope.json', '--out', tmp_path]) == EXIT_CONFIG
        assert 'not found' in capsys.readouterr().err

    def test_invalid_config(self, tmp_path):
        config = write_config(tmp_path / 'bad.json', {'command': 'solve', 'eps': [0.0]})
        assert run(['solve', '--config', config, '--out', tmp_path]) == EXIT_CONFIG

    def test_barrier_run(self, barrier_config, tmp_path, capsys):
        out = tmp_path / 'out'
        assert run(['barrier', '--config', barrier_config, '--out', out]) == EXIT_OK
        assert '[ok] barrier-p1.5-eps1' in capsys.readouterr().out

        meta, header, rows = read_table_csv(out / 'barrier_p1.5_eps1.csv')
        assert header[:3] == ['x', 'y', 't']
        assert len(rows) == 500
        assert meta['normalized'] == 'True'
        assert (out / 'timings.json').exists()

    def test_timings_follow_config_out_dir(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        config = write_config(tmp_path / 'selftest.json', {
            'command': 'selftest', 'seed': 1, 'out_dir': 'from_config',
            'selftest': {'checks': ['group_axioms']},
        })
        assert run(['selftest', '--config', config]) == EXIT_OK
        assert (tmp_path / 'from_config' / 'selftest.json').exists()
        timings = json.loads((tmp_path / 'from_config' / 'timings.json').read_text())
        assert timings['command'] == 'selftest'
        assert not (tmp_path / Config.OUTPUT_DIR / 'timings.json').exists()


class TestBuildJobs:

    def test_barrier_sweep(self, tmp_path):
        config = {'command': 'barrier', 'p': [2.0, 1.5], 'eps': [0.0, 0.5, 1.0], 'samples': 10}
        jobs = cli.build_jobs('barrier', config, tmp_path)
        assert len(jobs) == 6
        assert {job.job_type for job in jobs} == {'barrier.samples'}
        assert jobs[0].payload['samples'] == 10
        assert 'command' not in jobs[0].payload

    def test_verify_payload(self, tmp_path):
        config = {'command': 'verify', 'eps': [0.25], 'box': {'Lxy': 4, 'Lt': 4, 'm': 33},
                  'verify': {'p_check': 1.5, 'tol': 0.1}}
        [job] = cli.build_jobs('verify', config, tmp_path, resume=tmp_path / 'old')
        assert job.job_type == 'verify.suite'
        assert job.job_id == 'verify-eps0.25'
        assert job.payload['eps'] == 0.25
        assert job.payload['p_check'] == 1.5
        assert job.payload['resume'] == str(tmp_path / 'old')
        assert len(job.payload['config_hash']) == 16

    def test_config_hash_stable(self, tmp_path):
        config = {'command': 'solve', 'eps': [0.0, 0.5]}
        first, second = cli.build_jobs('solve', config, tmp_path)
        assert first.payload['config_hash'] == second.payload['config_hash']


class TestJobService:

    def test_results_in_submission_order(self, echo_handlers):
        jobs = [Job('test.echo', {'value': k}, f"echo-{k}") for k in range(3)]
        results = run_jobs(jobs)
        assert [r.result['value'] for r in results] == [0, 1, 2]
        assert all(r.ok for r in results)

    def test_error_capture(self, echo_handlers):
        [result] = run_jobs([Job('test.fail', {}, 'fail')])
        assert result.status == JobStatus.FAILED
        assert result.exit_code == 3
        assert result.result == {'file': 'partial.json'}
        assert result.error['error']['code'] == 'NON_CONVERGED'

    def test_unknown_job_type(self):
        with pytest.raises(ConfigError):
            JobService.execute_job(Job('test.missing', {}, 'missing'))

    def test_exit_code_first_failure(self):
        results = [
            JobResult('a', 'x', JobStatus.COMPLETED, {'passed': True}),
            JobResult('b', 'x', JobStatus.FAILED, exit_code=3),
            JobResult('c', 'x', JobStatus.FAILED, exit_code=2),
        ]
        assert cli._exit_code(results) == 3

    def test_exit_code_failed_checks(self):
        results = [JobResult('a', 'x', JobStatus.COMPLETED, {'passed': False, 'failed': ['kato']})]
        with pytest.raises(VerificationError) as info:
            cli._exit_code(results)
        assert info.value.exit_code == 4
