/** Runtime validation of outgoing submissions; the server enforces the
 * same shape, so a payload that fails here would be a 422 anyway. */

import { z } from "zod";

export const submissionPolygonSchema = z.object({
  class_id: z.number().int().min(0).max(254),
  vertices: z.array(z.tuple([z.number(), z.number()])).min(3),
});

export const apiSubmissionPayloadSchema = z.object({
  task_id: z.string().min(1),
  polygons: z.array(submissionPolygonSchema),
  active_seconds: z.number().min(0),
});

export type ValidatedPayload = z.infer<typeof apiSubmissionPayloadSchema>;

export function validatePayload(payload: unknown): ValidatedPayload {
  return apiSubmissionPayloadSchema.parse(payload);
}
