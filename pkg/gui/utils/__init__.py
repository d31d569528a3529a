"""
GUI 유틸리티 패키지
"""

from .process_monitor import ExperimentProcessMonitor

__all__ = [
    'ExperimentProcessMonitor',
]
