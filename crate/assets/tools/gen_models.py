#!/usr/bin/env python3
"""Regenerates the model files under assets/models.

Geometry is built from boxes, cylinders and spheres. Human proportions follow
standard anthropometric segment ratios of body height.
"""
import json
import math
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "models")


def box(size, center, growth="z"):
    return {"kind": "box", "size": size, "center": center, "growth_axis": growth}


def cyl(r, length, center, axis="z", growth="z"):
    return {"kind": "cylinder", "radius": r, "length": length, "axis": axis,
            "center": center, "growth_axis": growth}


def sphere(r, center, growth="z"):
    return {"kind": "sphere", "radius": r, "center": center, "growth_axis": growth}


def link(name, shape, density, lg=None, dg=None):
    d = {"name": name, "shape": shape, "density": density}
    if lg:
        d["length_group"] = lg
    if dg:
        d["density_group"] = dg
    return d


def joint(name, parent, child, xyz, axis, limits, motor=None, group=None, rpy=(0, 0, 0)):
    d = {"name": name, "type": "revolute", "parent": parent, "child": child,
         "origin": {"xyz": list(xyz), "rpy": list(rpy)}, "axis": list(axis), "limits": list(limits)}
    if motor:
        d["motor"] = motor
    if group:
        d["motor_group"] = group
    return d


def frame(name, link_name, xyz):
    return {"name": name, "link": link_name, "origin": {"xyz": list(xyz)}}


def write(name, model):
    with open(os.path.join(OUT, name), "w") as f:
        json.dump(model, f, indent=2)
        f.write("\n")


Y = (0, 1, 0)


def chain():
    return {
        "schema_version": 1, "name": "chain", "kind": "robot", "base_link": "base",
        "links": [
            link("base", box([0.2, 0.2, 0.1], [0, 0, 0]), 1000, dg="base"),
            link("link1", box([0.4, 0.05, 0.05], [0.2, 0, 0], "x"), 800, lg="upper", dg="upper"),
            link("link2", cyl(0.03, 0.3, [0.15, 0, 0], "x", "x"), 1200, lg="lower", dg="lower"),
        ],
        "joints": [
            joint("j1", "base", "link1", (0, 0, 0), Y, (-3.0, 3.0), "M", "shoulder"),
            joint("j2", "link1", "link2", (0.4, 0, 0), Y, (-3.0, 3.0), "S"),
        ],
        "frames": [
            frame("base", "base", (0, 0, 0)),
            frame("elbow_marker", "link1", (0.4, 0.05, 0)),
            frame("tip", "link2", (0.3, 0, 0)),
        ],
        "parameter_groups": {"length": ["upper", "lower"], "density": ["base", "upper", "lower"],
                             "motor": ["shoulder"]},
        "symmetry": [],
    }


def toy_robot():
    return {
        "schema_version": 1, "name": "toy_robot", "kind": "robot", "base_link": "torso",
        "links": [
            link("torso", box([0.12, 0.22, 0.45], [0, 0, 0.2]), 600, "torso", "torso"),
            link("l_thigh", cyl(0.04, 0.3, [0, 0, -0.15]), 900, "upper_leg", "upper_leg"),
            link("r_thigh", cyl(0.04, 0.3, [0, 0, -0.15]), 900, "upper_leg", "upper_leg"),
            link("l_shank", cyl(0.035, 0.3, [0, 0, -0.15]), 900, "lower_leg", "lower_leg"),
            link("r_shank", cyl(0.035, 0.3, [0, 0, -0.15]), 900, "lower_leg", "lower_leg"),
            link("l_arm", cyl(0.03, 0.45, [0, 0, -0.225]), 900, "arm", "arm"),
            link("r_arm", cyl(0.03, 0.45, [0, 0, -0.225]), 900, "arm", "arm"),
        ],
        "joints": [
            joint("l_hip_pitch", "torso", "l_thigh", (0, 0.08, -0.03), Y, (-1.8, 0.6), "M", "hip"),
            joint("r_hip_pitch", "torso", "r_thigh", (0, -0.08, -0.03), Y, (-1.8, 0.6), "M", "hip"),
            joint("l_knee", "l_thigh", "l_shank", (0, 0, -0.3), Y, (0.0, 2.2), "M", "knee"),
            joint("r_knee", "r_thigh", "r_shank", (0, 0, -0.3), Y, (0.0, 2.2), "M", "knee"),
            joint("l_shoulder_pitch", "torso", "l_arm", (0, 0.14, 0.4), Y, (-3.0, 1.0), "S", "shoulder"),
            joint("r_shoulder_pitch", "torso", "r_arm", (0, -0.14, 0.4), Y, (-3.0, 1.0), "S", "shoulder"),
        ],
        "frames": [
            frame("base", "torso", (0, 0, 0)),
            frame("l_sole", "l_shank", (0, 0, -0.32)),
            frame("r_sole", "r_shank", (0, 0, -0.32)),
            frame("l_hand", "l_arm", (0, 0, -0.45)),
            frame("r_hand", "r_arm", (0, 0, -0.45)),
        ],
        "parameter_groups": {
            "length": ["torso", "arm", "upper_leg", "lower_leg"],
            "density": ["torso", "arm", "upper_leg", "lower_leg"],
            "motor": ["hip", "knee", "shoulder"],
        },
        "symmetry": [
            {"left": "l_hip_pitch", "right": "r_hip_pitch", "sign": 1},
            {"left": "l_knee", "right": "r_knee", "sign": 1},
            {"left": "l_shoulder_pitch", "right": "r_shoulder_pitch", "sign": 1},
        ],
    }


def human(height, mass):
    h = height
    legs_z = 0.541 * h
    foot_h = 0.039 * h
    lumbar_z = 0.10 * h
    thorax_z = 0.30 * h
    arm_l = 0.38 * h
    shapes = {
        "pelvis_legs": box([0.16, 0.30, legs_z], [0, 0, -0.2205 * h]),
        "l_foot": box([0.24, 0.09, foot_h], [0.06, 0, -foot_h / 2]),
        "r_foot": box([0.24, 0.09, foot_h], [0.06, 0, -foot_h / 2]),
        "lumbar": box([0.18, 0.30, lumbar_z], [0, 0, lumbar_z / 2]),
        "thorax": box([0.20, 0.34, thorax_z], [0, 0, thorax_z / 2]),
        "l_arm": cyl(0.04, arm_l, [0, 0, -arm_l / 2]),
        "r_arm": cyl(0.04, arm_l, [0, 0, -arm_l / 2]),
    }
    # segment mass fractions
    frac = {"pelvis_legs": 0.46, "l_foot": 0.0145, "r_foot": 0.0145, "lumbar": 0.139,
            "thorax": 0.272, "l_arm": 0.05, "r_arm": 0.05}

    def volume(s):
        if s["kind"] == "box":
            return s["size"][0] * s["size"][1] * s["size"][2]
        return math.pi * s["radius"] ** 2 * s["length"]

    links = [link(n, shapes[n], round(mass * frac[n] / volume(shapes[n]), 3)) for n in shapes]
    name = f"human_{int(round(h * 100))}"
    return {
        "schema_version": 1, "name": name, "kind": "human", "base_link": "pelvis_legs",
        "links": links,
        "joints": [
            joint("l_ankle", "pelvis_legs", "l_foot", (0, 0.09, -0.491 * h), Y, (-0.7, 0.7)),
            joint("r_ankle", "pelvis_legs", "r_foot", (0, -0.09, -0.491 * h), Y, (-0.7, 0.7)),
            joint("L5S1", "pelvis_legs", "lumbar", (0, 0, 0.03 * h), Y, (-0.5, 1.4)),
            joint("T9T8", "lumbar", "thorax", (0, 0, lumbar_z), Y, (-0.4, 0.7)),
            joint("l_shoulder", "thorax", "l_arm", (0, 0.18, 0.158 * h), Y, (-3.0, 1.0)),
            joint("r_shoulder", "thorax", "r_arm", (0, -0.18, 0.158 * h), Y, (-3.0, 1.0)),
        ],
        "frames": [
            frame("base", "pelvis_legs", (0, 0, 0)),
            frame("l_sole", "l_foot", (0.06, 0, -foot_h)),
            frame("r_sole", "r_foot", (0.06, 0, -foot_h)),
            frame("l_hand", "l_arm", (0, 0, -arm_l)),
            frame("r_hand", "r_arm", (0, 0, -arm_l)),
        ],
        "parameter_groups": {"length": [], "density": [], "motor": []},
        "symmetry": [
            {"left": "l_ankle", "right": "r_ankle", "sign": 1},
            {"left": "l_shoulder", "right": "r_shoulder", "sign": 1},
        ],
    }


def arm_agent(name, kind, shoulder_height, arm_len, motor=None):
    stand_h = shoulder_height
    j = joint("shoulder", "stand", "arm", (0, 0, stand_h / 2), Y, (-1.5, 1.5))
    if motor:
        j["motor"] = motor
    model = {
        "schema_version": 1, "name": name, "kind": kind, "base_link": "stand",
        "links": [
            link("stand", box([0.3, 0.2, stand_h], [0, 0, 0]), 300.0, "stand" if kind == "robot" else None,
                 "stand" if kind == "robot" else None),
            link("arm", cyl(0.02, arm_len, [arm_len / 2, 0, 0], "x", "x"), 1000.0,
                 "arm" if kind == "robot" else None, "arm" if kind == "robot" else None),
        ],
        "joints": [j],
        "frames": [
            frame("base", "stand", (0, 0, 0)),
            frame("sole", "stand", (0, 0, -stand_h / 2)),
            frame("hand", "arm", (arm_len, 0, 0)),
        ],
        "parameter_groups": {"length": [], "density": [], "motor": []},
        "symmetry": [],
    }
    if kind == "robot":
        model["parameter_groups"] = {"length": ["stand", "arm"], "density": ["stand", "arm"], "motor": []}
    return model


def reference_humanoid():
    """Full-body layout with 8 length groups, 8 density groups and 13 motor groups."""
    links = []
    joints = []
    frames = [frame("base", "root_link", (0, 0, 0))]

    def add_link(name, shape, density, group=None):
        links.append(link(name, shape, density, group, group))

    add_link("root_link", box([0.1, 0.18, 0.08], [0, 0, 0.0]), 1000, "root")
    add_link("torso_1", sphere(0.03, [0, 0, 0]), 1000, "torso_1")
    add_link("torso_2", sphere(0.03, [0, 0, 0]), 1000, "torso_2")
    add_link("chest", box([0.12, 0.22, 0.3], [0, 0, 0.15]), 700, "chest")
    joints.append(joint("torso_pitch", "root_link", "torso_1", (0, 0, 0.06), (0, 1, 0), (-0.4, 1.2), "M", "torso_pitch"))
    joints.append(joint("torso_roll", "torso_1", "torso_2", (0, 0, 0), (1, 0, 0), (-0.5, 0.5), "M", "torso_roll"))
    joints.append(joint("torso_yaw", "torso_2", "chest", (0, 0, 0), (0, 0, 1), (-0.8, 0.8), "S", "torso_yaw"))
    for side, sgn in (("l", 1), ("r", -1)):
        p = f"{side}_"
        add_link(p + "shoulder_1", sphere(0.025, [0, 0, 0]), 1000)
        add_link(p + "shoulder_2", sphere(0.025, [0, 0, 0]), 1000)
        add_link(p + "upper_arm", cyl(0.03, 0.2, [0, 0, -0.1]), 900, "upper_arm")
        add_link(p + "forearm", cyl(0.025, 0.2, [0, 0, -0.1]), 900, "forearm")
        joints += [
            joint(p + "shoulder_pitch", "chest", p + "shoulder_1", (0, sgn * 0.14, 0.27), (0, 1, 0), (-3.0, 0.5), "M", "shoulder_pitch"),
            joint(p + "shoulder_roll", p + "shoulder_1", p + "shoulder_2", (0, 0, 0), (sgn, 0, 0), (0.0, 2.8), "M", "shoulder_roll"),
            joint(p + "shoulder_yaw", p + "shoulder_2", p + "upper_arm", (0, 0, 0), (0, 0, 1), (-1.0, 1.0), "S", "shoulder_yaw"),
            joint(p + "elbow", p + "upper_arm", p + "forearm", (0, 0, -0.2), (0, 1, 0), (-2.0, 0.0), "S", "elbow"),
        ]
        frames.append(frame(p + "hand", p + "forearm", (0, 0, -0.2)))
        add_link(p + "hip_1", sphere(0.03, [0, 0, 0]), 1000)
        add_link(p + "hip_2", sphere(0.03, [0, 0, 0]), 1000)
        add_link(p + "upper_leg", cyl(0.04, 0.25, [0, 0, -0.125]), 900, "upper_leg")
        add_link(p + "lower_leg", cyl(0.035, 0.25, [0, 0, -0.125]), 900, "lower_leg")
        add_link(p + "ankle_1", sphere(0.025, [0, 0, 0]), 1000)
        add_link(p + "foot", box([0.16, 0.07, 0.03], [0.03, 0, -0.015]), 800)
        joints += [
            joint(p + "hip_pitch", "root_link", p + "hip_1", (0, sgn * 0.07, -0.04), (0, 1, 0), (-1.8, 0.6), "L", "hip_pitch"),
            joint(p + "hip_roll", p + "hip_1", p + "hip_2", (0, 0, 0), (1, 0, 0), (-0.5, 0.5), "M", "hip_roll"),
            joint(p + "hip_yaw", p + "hip_2", p + "upper_leg", (0, 0, 0), (0, 0, 1), (-0.8, 0.8), "M", "hip_yaw"),
            joint(p + "knee", p + "upper_leg", p + "lower_leg", (0, 0, -0.25), (0, 1, 0), (0.0, 2.2), "L", "knee"),
            joint(p + "ankle_pitch", p + "lower_leg", p + "ankle_1", (0, 0, -0.25), (0, 1, 0), (-0.7, 0.7), "M", "ankle_pitch"),
            joint(p + "ankle_roll", p + "ankle_1", p + "foot", (0, 0, 0), (1, 0, 0), (-0.4, 0.4), "S", "ankle_roll"),
        ]
        frames.append(frame(p + "sole", p + "foot", (0.03, 0, -0.03)))
    sym = []
    for j in joints:
        if j["name"].startswith("l_"):
            right = "r_" + j["name"][2:]
            n = j["name"]
            sign = -1 if (("roll" in n and "shoulder" not in n) or "yaw" in n) else 1
            sym.append({"left": j["name"], "right": right, "sign": sign})
    return {
        "schema_version": 1, "name": "reference_humanoid", "kind": "robot", "base_link": "root_link",
        "links": links, "joints": joints, "frames": frames,
        "parameter_groups": {
            "length": ["root", "torso_1", "torso_2", "chest", "upper_arm", "forearm", "upper_leg", "lower_leg"],
            "density": ["root", "torso_1", "torso_2", "chest", "upper_arm", "forearm", "upper_leg", "lower_leg"],
            "motor": ["torso_pitch", "torso_roll", "torso_yaw", "hip_pitch", "hip_roll", "hip_yaw", "knee",
                      "ankle_pitch", "ankle_roll", "shoulder_pitch", "shoulder_roll", "shoulder_yaw", "elbow"],
        },
        "symmetry": sym,
    }


def main():
    os.makedirs(OUT, exist_ok=True)
    write("chain.json", chain())
    write("toy_robot.json", toy_robot())
    for h, m in ((1.66, 62.0), (1.68, 64.0), (1.78, 75.0), (1.82, 80.0)):
        model = human(h, m)
        write(model["name"] + ".json", model)
    write("arm_human.json", arm_agent("arm_human", "human", 1.0, 0.5))
    write("arm_robot.json", arm_agent("arm_robot", "robot", 1.0, 0.5, motor="unit"))
    write("reference_humanoid.json", reference_humanoid())


if __name__ == "__main__":
    main()
