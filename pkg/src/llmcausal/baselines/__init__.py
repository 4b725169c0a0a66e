"""Statistical causal discovery baselines: PC and GES."""
from .citests import CiResult, chisq_citest, ci_chisq, dsep_citest, dsep_oracle
from .cpdag import Cpdag, cpdag_eval_matrix, cpdag_of_dag, dag_to_cpdag, meek_closure, pdag_to_dag
from .ges import LocalScore, run_ges
from .pc import run_pc

__all__ = [
    "CiResult", "Cpdag", "LocalScore", "chisq_citest", "ci_chisq", "cpdag_eval_matrix",
    "cpdag_of_dag", "dag_to_cpdag", "dsep_citest", "dsep_oracle", "meek_closure",
    "pdag_to_dag", "run_ges", "run_pc",
]
