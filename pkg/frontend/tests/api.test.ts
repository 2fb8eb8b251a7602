import { describe, expect, it } from "vitest";

import { ApiError, ReviewApi } from "../src/api.js";
import { FakeReviewService } from "./fake_service.js";

describe("ReviewApi against the service double", () => {
  it("builds list queries and returns pages", async () => {
    const service = new FakeReviewService();
    const api = new ReviewApi("", service.fetch);
    const page = await api.listCandidates({ theme: "sacrifice", sort: "reward", limit: 50 });
    expect(page.items.length).toBeGreaterThan(0);
    expect(service.requests[0]).toContain("theme=sacrifice");
    expect(service.requests[0]).toContain("sort=reward");
  });

  it("maps error bodies onto ApiError", async () => {
    const service = new FakeReviewService();
    const api = new ReviewApi("", service.fetch);
    await expect(api.getCandidate("nope")).rejects.toThrowError(ApiError);
    await expect(api.getCandidate("nope")).rejects.toMatchObject({ status: 404 });
  });

  it("posts verdicts as JSON", async () => {
    const service = new FakeReviewService();
    const api = new ReviewApi("", service.fetch);
    const ack = await api.postVerdict(service.showcaseId, "accepted", "curator");
    expect(ack.verdict).toBe("accepted");
    expect(service.verdicts.get(service.showcaseId)?.reviewer).toBe("curator");
  });

  it("export raises on conflict until something is accepted", async () => {
    const service = new FakeReviewService();
    const api = new ReviewApi("", service.fetch);
    await expect(api.exportMarkdown()).rejects.toMatchObject({ status: 409 });
    await api.postVerdict(service.showcaseId, "accepted", "curator");
    const text = await api.exportMarkdown();
    expect(text).toContain("lichess.org/analysis");
  });
});
