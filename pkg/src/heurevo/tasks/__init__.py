from heurevo.tasks.base import (
    BASELINES,
    CONTRACTS,
    TASK_KINDS,
    ConfigError,
    FeasibilityError,
    InfeasibleDecisionError,
    InstanceTrace,
    ReferenceUnavailableError,
    Solution,
    TaskContract,
    TaskParseError,
    contract_for,
    evaluate_solution,
    generate_instance,
    instance_payload,
    parse_instance,
    reference_bound,
    run_baseline,
    run_policy,
)

__all__ = [
    "BASELINES",
    "CONTRACTS",
    "TASK_KINDS",
    "ConfigError",
    "FeasibilityError",
    "InfeasibleDecisionError",
    "InstanceTrace",
    "ReferenceUnavailableError",
    "Solution",
    "TaskContract",
    "TaskParseError",
    "contract_for",
    "evaluate_solution",
    "generate_instance",
    "instance_payload",
    "parse_instance",
    "reference_bound",
    "run_baseline",
    "run_policy",
]
