"""The fifth-session quiz: who owned each image and under which theme.

Items are every image collected across the given completed sessions, each
exactly once, shuffled by a seeded RNG so a task can be rebuilt bit-for-bit.
Owner and theme are scored independently, half a point each per item.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .errors import IncompleteGuesses, NoSourceImages, UnknownParticipant
from .model import MemoryGuess, MemoryItem, MemoryTask, SessionRecord


def build_memory_task(completed_sessions: list[SessionRecord], rng_seed: int) -> MemoryTask:
    if not completed_sessions:
        raise NoSourceImages("no completed sessions to draw images from")
    items = []
    for record in completed_sessions:
        session_items = [
            MemoryItem(image=topic.image, true_owner=pid, true_theme=record.theme_id)
            for pid, topic in sorted(record.topics.items())
            if topic.image is not None
        ]
        if not session_items:
            raise NoSourceImages(f"session {record.session_id} contributed no images")
        items.extend(session_items)
    random.Random(rng_seed).shuffle(items)
    return MemoryTask(items=items, seed=rng_seed)


def submit_guess(
    task: MemoryTask,
    participant_id: str,
    item_index: int,
    guessed_owner: str,
    guessed_theme: str,
) -> None:
    if not 0 <= item_index < len(task.items):
        raise IncompleteGuesses(f"item index {item_index} out of range")
    task.guesses_for(participant_id)[item_index] = MemoryGuess(
        guessed_owner=guessed_owner, guessed_theme=guessed_theme
    )


def score_memory_task(task: MemoryTask, participant_id: str) -> Fraction:
    """(#correct owners + #correct themes) / (2 x item count), as an exact fraction."""
    guesses = task.guesses.get(participant_id)
    if guesses is None:
        raise UnknownParticipant(f"no guesses recorded for {participant_id!r}")
    if any(guess is None for guess in guesses):
        missing = sum(1 for guess in guesses if guess is None)
        raise IncompleteGuesses(f"{missing} item(s) still unanswered")
    correct = 0
    for item, guess in zip(task.items, guesses):
        if guess.guessed_owner == item.true_owner:
            correct += 1
        if guess.guessed_theme == item.true_theme:
            correct += 1
    return Fraction(correct, 2 * len(task.items))
