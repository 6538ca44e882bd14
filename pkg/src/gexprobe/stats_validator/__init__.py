"""Hypothesis tests, intervals, resampling and the aggregate report."""
from gexprobe.stats_validator.alpha import TC_PER_TRADE, AlphaInputs, net_alpha
from gexprobe.stats_validator.inference import (PowerResult, RateEstimate, binomial_test, bonferroni,
                                                detection_rate, exact_power, normal_approx_n, power_analysis,
                                                rate_estimate, wilson_ci)
from gexprobe.stats_validator.report import StatsReport, build_report, write_report
from gexprobe.stats_validator.resampling import BootstrapResult, bootstrap_rate
from gexprobe.stats_validator.timeseries import Differencing, GrangerResult, PearsonResult, granger, pearson
from gexprobe.stats_validator.trend import TrendResult, cochran_armitage

__all__ = [
    "AlphaInputs", "BootstrapResult", "Differencing", "GrangerResult", "PearsonResult", "PowerResult",
    "RateEstimate", "StatsReport", "TC_PER_TRADE", "TrendResult", "binomial_test", "bonferroni",
    "bootstrap_rate", "build_report", "cochran_armitage", "detection_rate", "exact_power", "granger",
    "net_alpha", "normal_approx_n", "pearson", "power_analysis", "rate_estimate", "wilson_ci", "write_report",
]
