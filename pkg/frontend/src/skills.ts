// Skill browser/editor state. Save errors from the admin API (422) are
// mapped onto the field they mention so they can render inline.

import type { ApiClient } from "./api.js";
import type { ApiError, SkillDoc, SkillMeta } from "./types.js";

export type SkillField =
  | "name"
  | "description"
  | "prompt"
  | "triggers"
  | "tags"
  | "examples"
  | "general";

const FIELD_ORDER: SkillField[] = ["triggers", "tags", "examples", "name", "description", "prompt"];

/** Pick the field a validation message is about, or "general". */
export function fieldForMessage(message: string): SkillField {
  const lowered = message.toLowerCase();
  for (const field of FIELD_ORDER) {
    if (lowered.includes(field)) return field;
  }
  return "general";
}

export interface EditorState {
  skill: SkillDoc;
  draft: Partial<SkillDoc>;
  fieldErrors: Partial<Record<SkillField, string>>;
  saving: boolean;
}

export class SkillBrowser {
  skills: SkillMeta[] = [];
  editor: EditorState | null = null;
  listError: ApiError | null = null;

  constructor(private api: ApiClient) {}

  async refresh(): Promise<void> {
    const result = await this.api.listSkills();
    if (result.ok) {
      this.skills = result.value.skills;
      this.listError = null;
    } else {
      this.listError = result.error;
    }
  }

  async open(id: string): Promise<boolean> {
    const result = await this.api.getSkill(id);
    if (!result.ok) {
      this.listError = result.error;
      return false;
    }
    this.editor = { skill: result.value, draft: {}, fieldErrors: {}, saving: false };
    return true;
  }

  edit<K extends keyof SkillDoc>(field: K, value: SkillDoc[K]): void {
    if (!this.editor) return;
    this.editor.draft[field] = value;
    delete this.editor.fieldErrors[field as SkillField];
  }

  /** PUT the draft; on 422 the message lands next to the offending field
   * and the draft is preserved for correction. */
  async save(): Promise<boolean> {
    if (!this.editor) return false;
    this.editor.saving = true;
    const result = await this.api.updateSkill(this.editor.skill.id, this.editor.draft);
    this.editor.saving = false;
    if (!result.ok) {
      this.editor.fieldErrors[fieldForMessage(result.error.message)] = result.error.message;
      return false;
    }
    this.editor = { skill: result.value, draft: {}, fieldErrors: {}, saving: false };
    await this.refresh();
    return true;
  }

  async remove(id: string): Promise<boolean> {
    const result = await this.api.deleteSkill(id);
    if (!result.ok) {
      this.listError = result.error;
      return false;
    }
    if (this.editor?.skill.id === id) this.editor = null;
    await this.refresh();
    return true;
  }
}
