/**
 * Client-side mirror of the server JSON formats. Every request the studio
 * sends is validated against these schemas first, so a schema-invalid edit
 * surfaces as an inline error instead of a server round trip.
 */

import { z } from "zod";

export const pointSchema = z.tuple([z.number(), z.number()]);

export const footprintSchema = z.object({
  length_m: z.number().positive(),
  width_m: z.number().positive(),
  rear_to_cog_m: z.number().positive(),
  front_to_cog_m: z.number().positive(),
});

export const poseSchema = z.object({
  x_m: z.number(),
  y_m: z.number(),
  heading_rad: z.number(),
});

export const motionSchema = z.discriminatedUnion("model", [
  z.object({ model: z.literal("static") }),
  z.object({
    model: z.literal("constant_velocity"),
    vx_mps: z.number(),
    vy_mps: z.number(),
  }),
  z.object({
    model: z.literal("scripted"),
    samples: z
      .array(
        z.object({
          t_s: z.number(),
          x_m: z.number(),
          y_m: z.number(),
          heading_rad: z.number(),
          v_mps: z.number(),
        }),
      )
      .min(2),
  }),
]);

export const instanceTypeSchema = z.enum(["pedestrian", "parked", "active"]);

export const instanceSchema = z.object({
  id: z.string().min(1),
  type: instanceTypeSchema,
  footprint: footprintSchema,
  pose: poseSchema,
  motion: motionSchema,
});

export const laneSchema = z.object({
  id: z.string().min(1),
  centerline_m: z.array(pointSchema).min(2),
  width_m: z.number().positive(),
});

export const scenarioSchema = z
  .object({
    schema_version: z.number(),
    name: z.string().min(1),
    map: z.object({
      lanes: z.array(laneSchema).min(1),
      drivable_area: z.object({
        spine_m: z.array(pointSchema).min(2),
        left_extent_m: z.number().positive(),
        right_extent_m: z.number().positive(),
        polygon_m: z.array(pointSchema).optional(),
      }),
    }),
    ego: z.object({
      lane_id: z.string(),
      footprint: footprintSchema,
      initial_state: z.object({
        s_m: z.number(),
        d_m: z.number(),
        mu_rad: z.number(),
        v_mps: z.number(),
        a_mps2: z.number(),
        delta_rad: z.number(),
        omega_radps: z.number(),
      }),
    }),
    instances: z.array(instanceSchema),
    timing: z.object({
      duration_s: z.number().positive(),
      dt_s: z.number().positive(),
    }),
    bounds: z.record(z.string(), z.number()),
    rule_parameters: z.record(z.string(), z.record(z.string(), z.number())),
  })
  .superRefine((scenario, ctx) => {
    const laneIds = new Set(scenario.map.lanes.map((lane) => lane.id));
    if (!laneIds.has(scenario.ego.lane_id)) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        path: ["ego", "lane_id"],
        message: `unknown lane id ${scenario.ego.lane_id}`,
      });
    }
    const ids = scenario.instances.map((inst) => inst.id);
    if (new Set(ids).size !== ids.length) {
      ctx.addIssue({
        code: z.ZodIssueCode.custom,
        path: ["instances"],
        message: "duplicate instance ids",
      });
    }
  });

export const hierarchySchema = z
  .object({
    schema_version: z.number(),
    classes: z.array(z.array(z.string()).min(1)).min(1),
    rules: z.record(
      z.string(),
      z.object({ kind: z.string(), params: z.record(z.string(), z.number()) }),
    ),
  })
  .superRefine((hierarchy, ctx) => {
    const seen = new Set<string>();
    hierarchy.classes.forEach((cls, i) => {
      for (const rid of cls) {
        if (!(rid in hierarchy.rules)) {
          ctx.addIssue({
            code: z.ZodIssueCode.custom,
            path: ["classes", i],
            message: `undefined rule id ${rid}`,
          });
        }
        if (seen.has(rid)) {
          ctx.addIssue({
            code: z.ZodIssueCode.custom,
            path: ["classes", i],
            message: `rule ${rid} appears twice`,
          });
        }
        seen.add(rid);
      }
    });
  });

export const runRequestSchema = z.object({
  mode: z.enum(["offline", "online", "evaluate", "track-compare"]),
  scenario: scenarioSchema,
  hierarchy: hierarchySchema,
  config: z.record(z.string(), z.unknown()).optional(),
  candidate: z
    .object({
      points_m: z.array(pointSchema).min(4),
      target_speed_mps: z.number().positive().optional(),
    })
    .optional(),
});

export const segmentSchema = z.object({
  start: z.number().int().nonnegative(),
  end: z.number().int().nonnegative(),
  rules: z.array(z.string()),
});

export const runResponseSchema = z
  .object({
    mode: z.string(),
    scenario_hash: z.string(),
    trajectory: z.object({
      t_s: z.array(z.number()),
      poses: z.array(poseSchema),
      states: z.array(z.record(z.string(), z.number())),
    }),
    totals: z.record(z.string(), z.number()),
    segments: z.array(segmentSchema),
    verdict: z.enum(["Pass", "Fail"]).optional(),
    alternative: z
      .object({
        trajectory: z.object({ poses: z.array(poseSchema) }),
        totals: z.record(z.string(), z.number()),
        segments: z.array(segmentSchema),
      })
      .optional(),
  })
  .passthrough();

export type ScenarioDoc = z.infer<typeof scenarioSchema>;
export type HierarchyDoc = z.infer<typeof hierarchySchema>;
export type InstanceDoc = z.infer<typeof instanceSchema>;
export type RunRequest = z.infer<typeof runRequestSchema>;
export type RunResponse = z.infer<typeof runResponseSchema>;
export type Segment = z.infer<typeof segmentSchema>;
