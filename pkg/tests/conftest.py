import logging


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running simulation test")
    config.addinivalue_line("markers", "acceptance: acceptance-criterion gate")
    logging.getLogger("netsmooth").setLevel(logging.ERROR)
