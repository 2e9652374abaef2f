import json

import numpy as np
import pytest

from heis_imcf.api.errors import ConfigError
from heis_imcf.models.grid_models import ScalarField
from heis_imcf.services import job_handlers as jh
from heis_imcf.services.field_io import load_field, read_table_csv, save_field
from heis_imcf.validation import validate_report

BALL = {'gauge_ball': {'center': [0.0, 0.0, 0.0], 'radius': 0.8}}


@pytest.fixture
def payload(tmp_path):
    return {
        'box': {'Lxy': 2.0, 'Lt': 2.0, 'm': 17},
        'obstacle': BALL,
        'eps': 0.0,
        'solver': {'p_continuation': [2.0]},
        'out_dir': str(tmp_path),
        'config_hash': 'feedc0de',
        'seed': 3,
    }


def test_field_name():
    assert jh.field_name('v', 0.25, 1.5) == 'v_eps0.25_p1.5'
    assert jh.field_name('u', 0.0, 2.0) == 'u_eps0_p2'


class TestSolveHandler:

    def test_writes_fields_and_diagnostics(self, payload, tmp_path):
        result = jh.handle_solve_continuation(payload)
        assert result['converged']
        assert result['p_final'] == 2.0

        v = load_field(tmp_path, 'v_eps0_p2')
        assert v.box.m == (17, 17, 17)
        assert np.max(v.values) == pytest.approx(1.0)

        diagnostics = json.loads((tmp_path / 'diagnostics_eps0.json').read_text())
        assert diagnostics['converged']
        assert diagnostics['meta']['config_hash'] == 'feedc0de'
        assert diagnostics['meta']['m'] == '17x17x17'

    def test_resume_from_saved_field(self, payload, tmp_path):
        jh.handle_solve_continuation(payload)
        resumed = jh.handle_solve_continuation({**payload, 'resume': str(tmp_path)})
        assert resumed['converged']

    def test_resume_grid_mismatch(self, payload, tmp_path):
        mask, _ = jh._problem({**payload, 'box': {'Lxy': 2.0, 'Lt': 2.0, 'm': 21}})
        old = tmp_path / 'old'
        save_field(ScalarField(np.full(mask.box.shape, 0.5), mask.box, mask), old, 'v_eps0_p2')
        with pytest.raises(ConfigError):
            jh.handle_solve_continuation({**payload, 'resume': str(old)})


class TestFlowHandler:

    def test_exact_mode(self, tmp_path):
        payload = {
            'box': {'Lxy': 3.0, 'Lt': 3.0, 'm': 25},
            'obstacle': {'gauge_ball': {'center': [0.0, 0.0, 0.0], 'radius': 1.0}},
            'eps': 0.5, 'mode': 'exact', 's_values': [1.0, 1.5, 2.0, 2.5],
            'out_dir': str(tmp_path),
        }
        result = jh.handle_flow_levels(payload)
        assert result['slopes']['slope_inner'] == pytest.approx(1.0 / 3.0, abs=0.05)
        assert result['constants']['C0'] >= 1.0

        meta, header, rows = read_table_csv(tmp_path / 'flow_eps0.5.csv')
        assert header == jh.FLOW_HEADER
        assert [row[5] for row in rows] == ['OK'] * 4
        assert meta['mode'] == 'exact'


class TestVerifyHandler:

    def test_unknown_check(self, payload):
        with pytest.raises(ConfigError):
            jh.handle_verify_suite({**payload, 'checks': ['no_such_check']})

    def test_report_matches_schema(self, payload, tmp_path):
        result = jh.handle_verify_suite({**payload, 'checks': ['kato', 'harnack_ratio', 'hessian_cancellation']})
        names = [r['name'] for r in result['reports']]
        # hessian_cancellation is skipped at eps = 0
        assert names == ['kato', 'harnack_ratio']
        report = json.loads((tmp_path / result['file']).read_text())
        validate_report(report)
        assert report['meta']['p_check'] == 2.0

    def test_report_carries_clamp_record(self, payload, tmp_path):
        result = jh.handle_verify_suite({**payload, 'checks': ['kato']})
        assert [entry['p'] for entry in result['solver']] == [2.0]
        entry = result['solver'][0]
        assert entry['clamped_nodes'] == 0
        assert entry['max_principle_violation'] <= 1e-8
        report = json.loads((tmp_path / result['file']).read_text())
        validate_report(report)
        assert report['solver'] == result['solver']

    def test_exact_potential_check(self, payload):
        result = jh.handle_verify_suite({**payload, 'checks': ['exact_potential'], 'annulus': [1.0, 1.8],
                                         'oracle_tol': 0.5})
        [report] = result['reports']
        assert report['name'] == 'exact_potential'
        assert report['evaluated'] > 0
        assert report['details']['clamped_nodes'] == 0
        assert report['passed']
