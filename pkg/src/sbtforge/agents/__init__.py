from sbtforge.agents.blocksworld import (
    BW,
    BlocksWorldError,
    apply_action,
    block_uri,
    build_scene,
    check_conservation,
    scene_canonical,
    scene_purple_occupied,
)
from sbtforge.agents.env import EnvServer
from sbtforge.agents.runtime import (
    AgentError,
    AgentInstance,
    AgentRegistry,
    AsyncCompletion,
    fill_template,
    refresh_beliefs,
)
from sbtforge.agents.template import (
    AGENT,
    ActionDefinition,
    AgentTemplate,
    BehaviorBinding,
    EndpointDef,
    GoalDefinition,
    TemplateError,
    load_template,
)

__all__ = [
    "AGENT",
    "ActionDefinition",
    "AgentError",
    "AgentInstance",
    "AgentRegistry",
    "AgentTemplate",
    "AsyncCompletion",
    "BehaviorBinding",
    "BW",
    "BlocksWorldError",
    "EndpointDef",
    "EnvServer",
    "GoalDefinition",
    "TemplateError",
    "apply_action",
    "block_uri",
    "build_scene",
    "check_conservation",
    "fill_template",
    "load_template",
    "refresh_beliefs",
    "scene_canonical",
    "scene_purple_occupied",
]
