/** Keyboard-first control: digits label, "s" skips, "f" finalizes. */

export type KeyAction =
  | { kind: "label"; classIndex: number }
  | { kind: "skip" }
  | { kind: "finalize" };

export function actionForKey(key: string, classCount: number): KeyAction | null {
  if (key >= "1" && key <= "9") {
    const index = Number(key) - 1;
    return index < classCount ? { kind: "label", classIndex: index } : null;
  }
  if (key === "s" || key === "S") return { kind: "skip" };
  if (key === "f" || key === "F") return { kind: "finalize" };
  return null;
}
