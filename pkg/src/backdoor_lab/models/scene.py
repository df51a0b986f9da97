"""
Pydantic модели синтетических сцен и манифеста датасета.
"""
from enum import Enum
from typing import List

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Shape(str, Enum):
    CIRCLE = "circle"
    SQUARE = "square"
    TRIANGLE = "triangle"


class ForegroundColor(str, Enum):
    RED = "red"
    GREEN = "green"
    BLUE = "blue"
    YELLOW = "yellow"
    PURPLE = "purple"
    ORANGE = "orange"


class BackgroundColor(str, Enum):
    WHITE = "white"
    BLACK = "black"
    GRAY = "gray"
    BLUE = "blue"


class Size(str, Enum):
    SMALL = "small"
    LARGE = "large"


# 8-битные RGB значения именованных цветов. У всех цветов переднего плана
# разброс каналов равен 255, поэтому любая сцена хроматична.
COLOR_TABLE = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "purple": (160, 0, 255),
    "orange": (255, 140, 0),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
    "gray": (128, 128, 128),
}


class SceneSpec(BaseModel):
    """Описание сцены: фигура, цвета и размер."""

    model_config = ConfigDict(frozen=True)

    shape: Shape
    fg_color: ForegroundColor
    bg_color: BackgroundColor
    size: Size

    @model_validator(mode="after")
    def _check_colors(self) -> "SceneSpec":
        if self.fg_color.value == self.bg_color.value:
            raise ValueError(f"foreground and background are both {self.fg_color.value}")
        return self


class DatasetEntry(BaseModel):
    """Запись манифеста: сцена, подпись и имя PNG файла."""

    model_config = ConfigDict(extra="forbid")

    index: int = Field(ge=0)
    scene: SceneSpec
    caption: str
    image_file: str


class DatasetManifest(BaseModel):
    """Манифест датасета, полностью определяемый сидом и количеством."""

    model_config = ConfigDict(extra="forbid")

    seed: int
    count: int = Field(ge=1)
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    entries: List[DatasetEntry]

    def captions(self) -> List[str]:
        return [entry.caption for entry in self.entries]


def all_scene_specs() -> List[SceneSpec]:
    """Все допустимые сцены в фиксированном порядке перечислений."""
    specs = []
    for shape in Shape:
        for fg in ForegroundColor:
            for bg in BackgroundColor:
                if fg.value == bg.value:
                    continue
                for size in Size:
                    specs.append(SceneSpec(shape=shape, fg_color=fg, bg_color=bg, size=size))
    return specs
