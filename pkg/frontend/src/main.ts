// Bootstraps the judging screen from URL parameters:
//   ?pool=<pool_id>&participant=<participant_id>&token=<token>[&base=<url>]

import { JudgmentApi } from "./api.js";
import { renderJudging } from "./app.js";
import { JudgingSession } from "./judging.js";

const params = new URLSearchParams(window.location.search);
const poolId = params.get("pool");
const participant = params.get("participant");
const token = params.get("token");
const baseUrl = params.get("base") ?? "";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app container");

if (poolId === null || participant === null || token === null) {
  root.textContent = "Missing pool, participant, or token in the link you followed.";
} else {
  const api = new JudgmentApi(baseUrl, { participant_id: participant, token });
  const session = new JudgingSession(api, poolId, () => renderJudging(root, session));
  void session.start();
}
