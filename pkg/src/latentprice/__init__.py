"""Posted-price learning against buyers with finitely many valuations."""

from latentprice.adversarial import run_adversarial
from latentprice.cautious import run_cautious_search
from latentprice.demand import ValuationDistribution, make_instance, summarize
from latentprice.distfree import run_distribution_free
from latentprice.gamma import run_gamma_pricer
from latentprice.harness import ExperimentConfig, run_experiment, scaling_report
from latentprice.market import Market, OracleMarket, RegretTrace, compute_pseudo_regret
from latentprice.oracle import run_oracle_pricer
from latentprice.twoval import run_two_valuation

__all__ = [
    "ExperimentConfig",
    "Market",
    "OracleMarket",
    "RegretTrace",
    "ValuationDistribution",
    "compute_pseudo_regret",
    "make_instance",
    "run_adversarial",
    "run_cautious_search",
    "run_distribution_free",
    "run_experiment",
    "run_gamma_pricer",
    "run_oracle_pricer",
    "run_two_valuation",
    "scaling_report",
    "summarize",
]
__version__ = "0.1.0"
