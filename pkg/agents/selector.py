from typing import Dict

from agents.base import Learner


def get_empirical_model_learner(**kwargs):
    # Import within function to avoid circular imports
    from agents.empirical_model import EmpiricalModelLearner
    return EmpiricalModelLearner(**kwargs)


def get_q_learning_agent(**kwargs):
    # Import within function to avoid circular imports
    from agents.q_learning import QLearningAgent
    return QLearningAgent(**kwargs)


# Map of learner_id to learner creator function
LEARNER_CREATORS = {
    "empirical_model": get_empirical_model_learner,
    "q_learning": get_q_learning_agent,
}


def get_learner(learner_id: str, **kwargs) -> Learner:
    """Get a learner by ID

    Args:
        learner_id: The ID of the learner to get

    Returns:
        The learner instance
    """
    creator = LEARNER_CREATORS.get(learner_id.replace("-", "_"))
    if creator is None:
        raise ValueError(f"Unknown learner_id: {learner_id}")
    return creator(**kwargs)


def list_learners() -> Dict[str, Dict[str, str]]:
    return {learner_id: creator().describe() for learner_id, creator in LEARNER_CREATORS.items()}
