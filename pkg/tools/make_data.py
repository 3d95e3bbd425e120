"""Regenerate the shipped sample datasets and configs under src/constructminer/data.

Run from the repository root:  python3 tools/make_data.py
Output is deterministic (fixed seeds), so re-running produces identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from constructminer.synth import ActivityTemplate, generate_log

DATA = Path(__file__).resolve().parent.parent / "src" / "constructminer" / "data"

ENTRANCE_AISLE = "between the Living room and home entrance aisle"

ARUBA_LOCATIONS = {
    **{f"M{n:03d}": "Master bedroom" for n in (1, 2, 3, 5, 6, 7)},
    "M004": "Master bathroom",
    **{f"M{n:03d}": "Living room" for n in (8, 9, 10, 12, 13, 20)},
    "M011": ENTRANCE_AISLE,
    "M014": "Dining area",
    **{f"M{n:03d}": "Kitchen" for n in (15, 16, 17, 18)},
    "M019": "between the Kitchen and Dining area",
    **{f"M{n:03d}": "Hallway" for n in (21, 22, 23, 29)},
    "M024": "Guest bedroom",
    **{f"M{n:03d}": "Office" for n in (25, 26, 27, 28)},
    "M030": "Guest bathroom",
    "M031": "Guest bathroom",
    "D001": ENTRANCE_AISLE,
    "D002": "Kitchen back door",
    "D003": "Guest bathroom",
    "D004": "Garage door",
    "T001": "Master bedroom",
    "T002": "Living room",
    "T003": "Kitchen",
    "T004": "Hallway",
    "T005": "Office",
}

MILAN_LOCATIONS = {
    "M001": "Guest bedroom",
    "M002": "Guest bedroom",
    "M003": "Dining room",
    "M004": "Guest bathroom",
    "M005": "Workspace",
    "M006": "Living room",
    "M007": "Master bedroom",
    "M008": "Living room",
    "M009": "Kitchen",
    "M010": "Kitchen",
    "M011": "Corridor",
    "M012": "Kitchen",
    "M013": "Master bathroom",
    "M014": "Master bathroom",
    "M015": "Kitchen",
    "M016": "Master bedroom",
    "M017": "Workspace",
    "M018": "Guest bedroom",
    "M019": "Corridor",
    "M020": "Master bedroom",
    "M021": "Master bedroom",
    "M022": "Kitchen",
    "M023": "Kitchen",
    "M024": "Guest bathroom",
    "M025": "Walk-in closet",
    "M026": "Living room",
    "M027": "Entrance",
    "M028": "Master bathroom",
    "D001": "Entrance",
    "D002": "Kitchen",
    "D003": "Living room slider",
    "T001": "Kitchen",
    "T002": "Corridor",
    "T003": "Master bedroom",
    "T004": "Living room",
    "T005": "Guest bedroom",
    "T006": "Workspace",
}

ARUBA_MERGE = [
    ("Wash_Dishes", "Housekeeping"),
    ("Respirate", "Other"),
]

MILAN_MERGE = [
    ("Sleep", "Sleeping"),
    ("Eve_Meds", "Take_Medicine"),
    ("Morning_Meds", "Take_Medicine"),
    ("Dining_Rm_Activity", "Dining_Activity"),
    ("Master_Bedroom_Activity", "Master_Bedroom"),
    ("Chores", "Other"),
]

ARUBA_TEMPLATES = [
    ActivityTemplate("Sleeping", (("M003", "M002"), ("M001", "M005", "M007")), (23,), (2, 4), (60.0, 900.0)),
    ActivityTemplate(
        "Meal_Preparation",
        (("M015", "M016"), ("M017", "M015"), ("M018", "M016"), ("M014",), ("M014", "M019")),
        (8, 18),
    ),
    ActivityTemplate("Relax", (("M008", "M009", "M010"), ("M013", "M020", "M011")), (15, 20), (2, 4), (30.0, 300.0)),
    ActivityTemplate("Work", (("M026", "M027"), ("M025", "M028")), (10,), (3, 5), (20.0, 200.0)),
    ActivityTemplate("Eating", (("M015",), ("M016",), ("M014",), ("M017",)), (9, 19)),
    ActivityTemplate("Bed_to_Toilet", (("M003",), ("M004",), ("M004",), ("M002", "M003")), (4,)),
    ActivityTemplate("Enter_Home", (("D001=OPEN",), ("M011",), ("D001=CLOSE",), ("M012", "M011")), (13,)),
    ActivityTemplate("Leave_Home", (("D001=OPEN",), ("M011",), ("D001=CLOSE",)), (11,)),
    ActivityTemplate("Housekeeping", (("M021", "M022"), ("M009", "M013"), ("M024",)), (16,), (1, 3)),
    ActivityTemplate("Wash_Dishes", (("M015", "M017"), ("M018",)), (20,)),
    ActivityTemplate("Respirate", (("M009",),), (21,)),
]

MILAN_TEMPLATES = [
    ActivityTemplate("Sleep", (("M020", "M021"), ("M016", "M007")), (23,), (2, 4), (60.0, 900.0)),
    ActivityTemplate(
        "Kitchen_Activity",
        (("M009", "M010", "M022"), ("M012", "M015", "M023"), ("D002=OPEN",), ("D002=CLOSE",)),
        (7, 12, 18),
        (1, 3),
    ),
    ActivityTemplate(
        "Guest_Bathroom", (("M004",), ("M004", "M024"), ("M024",), ("M004",), ("M019",)), (10, 21)
    ),
    ActivityTemplate("Read", (("M006", "M008"), ("M026",)), (14,), (2, 4), (60.0, 400.0)),
    ActivityTemplate("Master_Bathroom", (("M013", "M014"), ("M028",)), (7, 22), (1, 2)),
    ActivityTemplate("Master_Bedroom_Activity", (("M007", "M020"), ("M025",)), (8,), (1, 2)),
    ActivityTemplate("Watch_TV", (("M006", "M026"), ("M008",)), (20,), (2, 4), (60.0, 600.0)),
    ActivityTemplate("Desk_Activity", (("M005",), ("M017",)), (11, 16), (2, 4), (30.0, 300.0)),
    ActivityTemplate("Dining_Rm_Activity", (("M003",),), (13,), (2, 3)),
    ActivityTemplate(
        "Leave_Home", (("M026", "M006"), ("D001=OPEN",), ("M027",), ("D001=CLOSE",)), (9,)
    ),
    ActivityTemplate("Morning_Meds", (("M009", "M012"),), (8,)),
    ActivityTemplate("Eve_Meds", (("M012", "M015"),), (19,)),
    ActivityTemplate("Meditate", (("M001", "M002"), ("M018",)), (6,), (2, 3)),
    ActivityTemplate(
        "Bed_to_Toilet", (("M021",), ("M025",), ("M013",), ("M028", "M013"), ("M025",), ("M020", "M021")), (3,)
    ),
    ActivityTemplate("Chores", (("M003", "M011"), ("M019",)), (15,)),
]

ARUBA_ORDER = [
    "Sleeping", "Meal_Preparation", "Relax", "Work", "Eating",
    "Bed_to_Toilet", "Enter_Home", "Leave_Home", "Housekeeping",
]
MILAN_ORDER = [
    "Sleeping", "Kitchen_Activity", "Guest_Bathroom", "Read", "Master_Bathroom", "Master_Bedroom",
    "Watch_TV", "Desk_Activity", "Dining_Activity", "Leave_Home", "Take_Medicine", "Meditate",
    "Bed_to_Toilet",
]

ARUBA_MAPPING = {
    "_comment": "construct -> any-of location|kind|value predicates for the action-based activities",
    "Meal_Preparation": {
        "Gathering ingredients": ["Kitchen|Motion|ON"],
        "Preparing ingredients": ["Kitchen|Motion|ON"],
        "Cooking ingredients": ["Kitchen|Motion|ON"],
        "Setting the table": ["Dining area|Motion|ON"],
        "Serving the meal": ["Dining area|Motion|ON", "between the Kitchen and Dining area|Motion|ON"],
    },
    "Eating": {
        "Food preparation": ["Kitchen|Motion|ON"],
        "Cooking": ["Kitchen|Motion|ON"],
        "Eating": ["Dining area|Motion|ON"],
        "Cleaning up": ["Kitchen|Motion|ON"],
    },
    "Bed_to_Toilet": {
        "Getting out of bed": ["Master bedroom|Motion|ON"],
        "Walking to the toilet": ["Master bathroom|Motion|ON"],
        "Using the toilet": ["Master bathroom|Motion|*"],
        "Walking back to bed or starting the day": ["Master bedroom|Motion|ON", "Hallway|Motion|ON"],
    },
    "Enter_Home": {
        "Open door": [f"{ENTRANCE_AISLE}|Door|OPEN"],
        "Enter home": [f"{ENTRANCE_AISLE}|Motion|ON"],
        "Close door": [f"{ENTRANCE_AISLE}|Door|CLOSE"],
        "Move within entrance area": [f"{ENTRANCE_AISLE}|Motion|*", "Living room|Motion|ON"],
    },
    "Leave_Home": {
        "Open door": [f"{ENTRANCE_AISLE}|Door|OPEN"],
        "Exit home": [f"{ENTRANCE_AISLE}|Motion|ON"],
        "Close door": [f"{ENTRANCE_AISLE}|Door|CLOSE"],
    },
}

MILAN_MAPPING = {
    "_comment": "construct -> any-of location|kind|value predicates for the action-based activities",
    "Guest_Bathroom": {
        "Entering the guest bathroom": ["Guest bathroom|Motion|ON"],
        "Using the toilet": ["Guest bathroom|Motion|ON"],
        "Using the shower": ["Guest bathroom|Motion|ON"],
        "Washing hands": ["Guest bathroom|Motion|ON"],
        "Exiting the guest bathroom": ["Corridor|Motion|ON"],
    },
    "Leave_Home": {
        "Leave home preparation": ["Living room|Motion|ON", "Entrance|Motion|ON"],
        "Open Door": ["Entrance|Door|OPEN"],
        "Exit Home": ["Entrance|Motion|ON"],
        "Close Door": ["Entrance|Door|CLOSE"],
    },
    "Bed_to_Toilet": {
        "Get out of bed": ["Master bedroom|Motion|ON"],
        "Walk to the walk-in closet": ["Walk-in closet|Motion|ON"],
        "Walk to the bathroom": ["Master bathroom|Motion|ON"],
        "Use the bathroom": ["Master bathroom|Motion|ON"],
        "Walk back to the walk-in closet": ["Walk-in closet|Motion|ON"],
        "Walk back to bed": ["Master bedroom|Motion|ON"],
    },
}


def write_csv(path: Path, header: tuple[str, str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_conf(path: Path, name: str, order: list[str], title: str) -> None:
    path.write_text(
        "\n".join(
            [
                f"# offline reproduction of the {name} construct table",
                f"dataset = {name}_sample.log",
                f"locations = {name}_locations.csv",
                f"merge_map = {name}_merge.csv",
                f"fixtures = {name}_fixtures.json",
                f"mapping = {name}_mapping.json",
                "offline = true",
                "n = 20",
                "seed = 42",
                f"title = {title}",
                f"activities = {','.join(order)}",
                "",
            ]
        ),
        encoding="utf-8",
    )


def main() -> None:
    for name, locations, merge, templates, mapping, order, seed, title in (
        ("aruba", ARUBA_LOCATIONS, ARUBA_MERGE, ARUBA_TEMPLATES, ARUBA_MAPPING, ARUBA_ORDER, 7,
         "Identified Structural Constructs for CASAS-Aruba"),
        ("milan", MILAN_LOCATIONS, MILAN_MERGE, MILAN_TEMPLATES, MILAN_MAPPING, MILAN_ORDER, 11,
         "Identified Structural Constructs for CASAS-Milan"),
    ):
        write_csv(DATA / f"{name}_locations.csv", ("sensor_id", "location"), sorted(locations.items()))
        write_csv(DATA / f"{name}_merge.csv", ("raw_label", "canonical_label"), merge)
        motion = sorted(s for s in locations if s.startswith("M"))
        temps = sorted(s for s in locations if s.startswith("T"))
        lines = generate_log(templates, motion, temps, days=12, seed=seed)
        (DATA / f"{name}_sample.log").write_text("\n".join(lines) + "\n", encoding="utf-8")
        (DATA / f"{name}_mapping.json").write_text(json.dumps(mapping, indent=2) + "\n", encoding="utf-8")
        write_conf(DATA / f"{name}.conf", name, order, title)


if __name__ == "__main__":
    main()
