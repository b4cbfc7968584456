"""Write a small image fixture tree so the service can run offline.

Usage: python scripts/make_demo_fixtures.py [fixture_dir]

Layout produced: <fixture_dir>/<locale>/<normalized_keyword>/1.png
Each image is a flat-color PNG labeled with its keyword.
"""

from __future__ import annotations

import sys
from pathlib import Path

from PIL import Image, ImageDraw

KEYWORDS = {
    "en": ["fried chicken", "tempura", "sushi", "ramen", "naruto", "curry", "favorite food"],
    "ja": ["唐揚げ", "天ぷら", "寿司", "ラーメン", "naruto", "カレー", "好きな食べ物"],
}

COLORS = [
    (196, 120, 60), (240, 200, 120), (90, 140, 200), (220, 220, 200),
    (240, 140, 60), (180, 150, 60), (140, 200, 140),
]


def main() -> None:
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
    count = 0
    for locale, keywords in KEYWORDS.items():
        for keyword, color in zip(keywords, COLORS):
            folder = root / locale / keyword.lower().replace(" ", "_")
            folder.mkdir(parents=True, exist_ok=True)
            image = Image.new("RGB", (320, 240), color)
            draw = ImageDraw.Draw(image)
            draw.text((12, 110), keyword, fill=(20, 20, 20))
            image.save(folder / "1.png")
            count += 1
    print(f"wrote {count} fixture images under {root}")


if __name__ == "__main__":
    main()
