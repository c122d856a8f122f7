# Learners package

from agents.base import Learner
from agents.selector import get_learner, LEARNER_CREATORS
