import { describe, expect, it } from "vitest";

import type { ApiClient } from "../src/api.js";
import { SkillBrowser, fieldForMessage } from "../src/skills.js";
import type { SkillDoc } from "../src/types.js";

const DOC: SkillDoc = {
  id: "id-1",
  name: "email rewrite",
  description: "formal rewrites",
  prompt: "# Goal\nRewrite.",
  version: "0.1.3",
  tags: ["email"],
  triggers: ["rewrite"],
  examples: [],
  confidence: null,
  scope: "user",
};

describe("fieldForMessage", () => {
  it("routes invariant messages to the named field", () => {
    expect(fieldForMessage("triggers must not contain duplicates")).toBe("triggers");
    expect(fieldForMessage("name must be non-empty")).toBe("name");
    expect(fieldForMessage("tags must be a list of strings")).toBe("tags");
  });

  it("falls back to general", () => {
    expect(fieldForMessage("something odd happened")).toBe("general");
  });
});

function fakeApi(put: (patch: Partial<SkillDoc>) => Promise<unknown>): ApiClient {
  return {
    listSkills: async () => ({ ok: true, value: { skills: [DOC] } }),
    getSkill: async () => ({ ok: true, value: DOC }),
    updateSkill: async (_id: string, patch: Partial<SkillDoc>) => put(patch),
    deleteSkill: async () => ({ ok: true, value: { deleted: DOC.id } }),
  } as unknown as ApiClient;
}

describe("SkillBrowser", () => {
  it("save success replaces the skill and clears the draft", async () => {
    const api = fakeApi(async (patch) => ({
      ok: true,
      value: { ...DOC, ...patch, version: "0.1.4" },
    }));
    const browser = new SkillBrowser(api);
    await browser.open(DOC.id);
    browser.edit("description", "edited");
    expect(await browser.save()).toBe(true);
    expect(browser.editor?.skill.version).toBe("0.1.4");
    expect(browser.editor?.draft).toEqual({});
  });

  it("422 lands on the offending field and keeps the draft", async () => {
    const api = fakeApi(async () => ({
      ok: false,
      error: { status: 422, message: "triggers must not contain duplicates" },
    }));
    const browser = new SkillBrowser(api);
    await browser.open(DOC.id);
    browser.edit("triggers", ["a", "a"]);
    expect(await browser.save()).toBe(false);
    expect(browser.editor?.fieldErrors.triggers).toContain("duplicates");
    expect(browser.editor?.draft.triggers).toEqual(["a", "a"]);
    expect(browser.editor?.skill.version).toBe("0.1.3");
  });

  it("editing a field clears its stale error", async () => {
    const api = fakeApi(async () => ({
      ok: false,
      error: { status: 422, message: "triggers must not contain duplicates" },
    }));
    const browser = new SkillBrowser(api);
    await browser.open(DOC.id);
    browser.edit("triggers", ["a", "a"]);
    await browser.save();
    browser.edit("triggers", ["a", "b"]);
    expect(browser.editor?.fieldErrors.triggers).toBeUndefined();
  });

  it("delete closes the editor for the removed skill", async () => {
    const api = fakeApi(async () => ({ ok: true, value: DOC }));
    const browser = new SkillBrowser(api);
    await browser.open(DOC.id);
    expect(await browser.remove(DOC.id)).toBe(true);
    expect(browser.editor).toBeNull();
  });
});
