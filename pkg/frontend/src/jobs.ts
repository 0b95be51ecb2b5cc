// Assessment job lifecycle: POST once, then poll at >= 1 s until done.
// At most one job is surfaced in the UI at a time.

import type { ApiClient } from "./api";
import type { AssessRequest, JobStatus } from "./types";

export interface JobProgress {
  jobId: string;
  status: JobStatus["status"];
  progress: number;
  error: string | null;
}

export async function runAssessment(
  api: ApiClient,
  request: AssessRequest,
  onProgress: (p: JobProgress) => void,
  pollMs = 1000,
): Promise<JobStatus> {
  const { job_id } = await api.assess(request);
  for (;;) {
    const status = await api.jobStatus(job_id);
    onProgress({
      jobId: job_id,
      status: status.status,
      progress: status.progress,
      error: status.error,
    });
    if (status.status === "done" || status.status === "error") {
      return status;
    }
    await new Promise((resolve) => setTimeout(resolve, pollMs));
  }
}
