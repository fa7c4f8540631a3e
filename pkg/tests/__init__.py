"""
meshplan Test Suite
===================

Unit tests for the meshplan network planner.

Test Categories:
    - test_basic.py: Import tests and the module entry point
    - test_netmodel.py / test_topogen.py: Network model and generator
    - test_selection.py / test_routing.py / test_tsgen.py: Planning phases
    - test_scheduler.py: Delay evaluation and schedule optimization
    - test_pipeline.py: Feedback loop and configuration consistency
    - test_metrics.py / test_experiment.py: Statistics, CSV files, batches
    - test_cli.py: Command line surface
    - test_acceptance.py: Dense-urban grid and oracle sweeps (grid runs are slow)

Running Tests:
    pytest tests/ -v
    pytest tests/ -v --cov=meshplan
    MESHPLAN_SLOW_TESTS=1 pytest tests/test_acceptance.py -v

Note:
    Grid tests run the full 16-seed grid and are skipped unless
    MESHPLAN_SLOW_TESTS is set.
"""

import os
import sys

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
