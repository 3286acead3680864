import pytest

from csirl.data import generate_expert, save_trajectories


@pytest.fixture(scope="session")
def expert_files(tmp_path_factory):
    """25 scripted-expert trajectories per env, generated once per session."""
    root = tmp_path_factory.mktemp("experts")
    out = {}
    for env in ("point_umaze", "lane_merge"):
        trajs, _ = generate_expert(env, 25, seed=0)
        out[env] = save_trajectories(root / f"{env}.jsonl", trajs)
    return out


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def report(request):
    """``report(n, ok, detail)``: record and print one pass/fail line for criterion ``n``."""
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def _report(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[n] = line
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
