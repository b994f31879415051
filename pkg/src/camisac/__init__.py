"""Camera-aided ISAC simulator with a from-scratch DDPG agent for joint RAT selection and precoding."""

__version__ = "0.1.0"
