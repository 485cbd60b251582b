from .car import CarEnv, CarEnvConfig
from .crossing import CrossingEnv, CrossingEnvConfig, CrossingObserver, crossing_guard_table, render
