import logging


class Learner:
    """Base Learner class that all tabular learners inherit from"""

    def __init__(self, name, learner_id, **kwargs):
        self.name = name
        self.learner_id = learner_id
        self.description = kwargs.get("description", "")
        self.logger = logging.getLogger(learner_id)

    def describe(self):
        """Metadata used by the CLI and the HTTP listing"""
        return {
            "learner_id": self.learner_id,
            "name": self.name,
            "description": self.description,
        }
