/** Minimal valid documents matching the server schemas. */

function line(x0: number, x1: number, y: number, n: number): [number, number][] {
  return Array.from({ length: n }, (_, i) => [x0 + ((x1 - x0) * i) / (n - 1), y]);
}

export function baseScenario() {
  return {
    schema_version: 1,
    name: "studio-road",
    map: {
      lanes: [
        { id: "lane0", centerline_m: line(-20, 220, 0, 61), width_m: 3.5 },
        { id: "lane1", centerline_m: line(-20, 220, -3.5, 61), width_m: 3.5 },
      ],
      drivable_area: {
        spine_m: line(-20, 220, 0, 61),
        left_extent_m: 3.25,
        right_extent_m: 6.75,
      },
    },
    ego: {
      lane_id: "lane0",
      footprint: { length_m: 4, width_m: 1.8, rear_to_cog_m: 2, front_to_cog_m: 2 },
      initial_state: {
        s_m: 20, d_m: 0, mu_rad: 0, v_mps: 4, a_mps2: 0, delta_rad: 0, omega_radps: 0,
      },
    },
    instances: [
      {
        id: "parked0",
        type: "parked",
        footprint: { length_m: 4, width_m: 1.8, rear_to_cog_m: 2, front_to_cog_m: 2 },
        pose: { x_m: 45, y_m: 2.55, heading_rad: 0 },
        motion: { model: "static" },
      },
    ],
    timing: { duration_s: 25, dt_s: 0.1 },
    bounds: {
      v_min_mps: 0, v_max_mps: 10,
      a_min_mps2: -3.5, a_max_mps2: 3.5,
      jerk_min_mps3: -4, jerk_max_mps3: 4,
      delta_min_rad: -1, delta_max_rad: 1,
      omega_min_radps: -0.5, omega_max_radps: 0.5,
      steer_accel_min_radps2: -2, steer_accel_max_radps2: 2,
    },
    rule_parameters: {},
  };
}

export function baseHierarchy() {
  return {
    schema_version: 1,
    classes: [["r5"], ["r3", "r6"], ["r4"], ["r2"], ["r7", "r8"], ["r1"]],
    rules: {
      r1: { kind: "pedestrian_clearance", params: { d: 1.0, eta: 0.067, v_max: 10 } },
      r2: { kind: "drivable_area", params: { d_max: 2 } },
      r3: { kind: "lane_keeping", params: { d_max: 2 } },
      r4: { kind: "speed_max", params: { v_limit: 7, v_max: 10 } },
      r5: { kind: "speed_min", params: { v_limit: 3 } },
      r6: {
        kind: "comfort",
        params: { a_limit: 2.5, a_max: 3.5, a_lat_limit: 1.75, a_lat_max: 3.5 },
      },
      r7: { kind: "parked_clearance", params: { d: 0.3, eta: 0.35, v_max: 10 } },
      r8: {
        kind: "active_clearance",
        params: {
          d_left: 0.4, eta_left: 0.05, d_right: 0.4, eta_right: 0.05,
          d_front: 1.0, eta_front: 0.15, v_max: 10,
        },
      },
    },
  };
}
