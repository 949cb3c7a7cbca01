"""
Connect Four against a stochastic scripted opponent, and the offline game
generator.
"""
import numpy as np

from lpt.envs.base import ActionSpace, Environment, StepResult
from lpt.envs.dataset import OfflineDataset
from lpt.errors import EnvStepError, ValidationError
from lpt.model import Trajectory
from lpt.numerics import RngStream

ROWS = 6
COLS = 7
AGENT = 1
OPPONENT = -1
OPPONENT_EPSILON = 0.5
BEHAVIOR_MIX = 0.5


def legal_moves(board: np.ndarray) -> list[int]:
    return [c for c in range(COLS) if board[0, c] == 0]


def drop_piece(board: np.ndarray, col: int, player: int) -> int:
    """Place ``player`` in the lowest empty row of ``col``; returns the row."""
    for row in reversed(range(ROWS)):
        if board[row, col] == 0:
            board[row, col] = player
            return row
    raise EnvStepError(f"column {col} is full")


def is_winner(board: np.ndarray, player: int) -> bool:
    mine = board == player
    # horizontal, vertical, and both diagonals
    if np.any(mine[:, :-3] & mine[:, 1:-2] & mine[:, 2:-1] & mine[:, 3:]):
        return True
    if np.any(mine[:-3] & mine[1:-2] & mine[2:-1] & mine[3:]):
        return True
    if np.any(mine[:-3, :-3] & mine[1:-2, 1:-2] & mine[2:-1, 2:-1] & mine[3:, 3:]):
        return True
    return bool(np.any(mine[3:, :-3] & mine[2:-1, 1:-2] & mine[1:-2, 2:-1] & mine[:-3, 3:]))


def winning_move(board: np.ndarray, player: int) -> int | None:
    for col in legal_moves(board):
        trial = board.copy()
        drop_piece(trial, col, player)
        if is_winner(trial, player):
            return col
    return None


def heuristic_move(board: np.ndarray, player: int, rng: np.random.Generator) -> int:
    """Win if possible, else block the opponent's immediate win, else random."""
    col = winning_move(board, player)
    if col is None:
        col = winning_move(board, -player)
    if col is None:
        moves = legal_moves(board)
        col = moves[int(rng.integers(len(moves)))]
    return col


def mixed_move(board: np.ndarray, player: int, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform-random legal move with probability ``epsilon``, heuristic otherwise."""
    if rng.random() < epsilon:
        moves = legal_moves(board)
        return moves[int(rng.integers(len(moves)))]
    return heuristic_move(board, player, rng)


class ConnectFour(Environment):
    """
    The agent (+1) moves first; the state is the flattened 6x7 board with the
    agent's pieces as +1 and the opponent's as -1. Return is +1 win, 0 draw,
    -1 loss, and an illegal column forfeits the game with -1.
    """

    env_id = "connect4-v0"
    horizon = (ROWS * COLS + 1) // 2

    def __init__(self, opponent_epsilon: float = OPPONENT_EPSILON):
        if not 0.0 <= opponent_epsilon <= 1.0:
            raise ValidationError("opponent_epsilon must lie in [0, 1]")
        self.opponent_epsilon = opponent_epsilon
        self.board = np.zeros((ROWS, COLS), dtype=np.int64)
        self.done = True
        self._return = 0.0
        self._rng: np.random.Generator | None = None

    @property
    def state_dim(self) -> int:
        return ROWS * COLS

    @property
    def action_space(self) -> ActionSpace:
        return ActionSpace(discrete=True, size=COLS)

    def state(self) -> np.ndarray:
        return self.board.reshape(-1).astype(np.float64)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._rng = rng
        self.board = np.zeros((ROWS, COLS), dtype=np.int64)
        self.done = False
        self._return = 0.0
        return self.state()

    def is_legal(self, action) -> bool:
        return 0 <= int(action) < COLS and self.board[0, int(action)] == 0

    def _finish(self, value: float) -> StepResult:
        self._return = value
        self.done = True
        return StepResult(self.state(), True)

    def step(self, action) -> StepResult:
        if self.done:
            raise EnvStepError("step() called on a finished game; call reset() first")
        if not self.is_legal(action):
            return self._finish(-1.0)
        drop_piece(self.board, int(action), AGENT)
        if is_winner(self.board, AGENT):
            return self._finish(1.0)
        if not legal_moves(self.board):
            return self._finish(0.0)
        drop_piece(self.board, mixed_move(self.board, OPPONENT, self.opponent_epsilon, self._rng), OPPONENT)
        if is_winner(self.board, OPPONENT):
            return self._finish(-1.0)
        if not legal_moves(self.board):
            return self._finish(0.0)
        return StepResult(self.state(), False)

    def episode_return(self) -> float:
        return self._return


def gen_connect4_dataset(
    n_games: int,
    behavior_mix: float,
    seed: int,
    opponent_epsilon: float = OPPONENT_EPSILON,
) -> OfflineDataset:
    """Games of an epsilon'-mixture behavior policy (epsilon' = behavior_mix) against the opponent."""
    if n_games < 1:
        raise ValidationError("n_games must be >= 1")
    if not 0.0 <= behavior_mix <= 1.0:
        raise ValidationError("behavior_mix must lie in [0, 1]")
    env = ConnectFour(opponent_epsilon)
    trajectories, returns = [], []
    for i in range(n_games):
        rng = RngStream.derive(seed, "connect4-game", i).numpy
        state = env.reset(rng)
        states, actions = [], []
        done = False
        while not done:
            action = mixed_move(env.board, AGENT, behavior_mix, rng)
            states.append(state)
            actions.append(action)
            state, done = env.step(action).state, env.done
        trajectories.append(Trajectory(np.array(states), np.array(actions, dtype=np.int64)))
        returns.append(env.episode_return())
    return OfflineDataset(
        env_id=ConnectFour.env_id,
        state_dim=ROWS * COLS,
        discrete=True,
        action_size=COLS,
        trajectories=trajectories,
        returns=np.array(returns),
        metadata={
            "generator": "mixed-heuristic",
            "seed": seed,
            "behavior_mix": behavior_mix,
            "opponent_epsilon": opponent_epsilon,
        },
    )


def replay_connect4(traj: Trajectory, y: float) -> list[str]:
    """
    Legality check for a stochastic game: every agent move is a legal column,
    and each next board equals the previous one plus the agent's piece and
    exactly one gravity-respecting opponent piece.
    """
    problems = []
    if y not in (-1.0, 0.0, 1.0):
        problems.append(f"return {y} not in {{-1, 0, 1}}")
    for t, action in enumerate(traj.actions):
        board = traj.states[t].reshape(ROWS, COLS).astype(np.int64)
        if not (0 <= action < COLS) or board[0, action] != 0:
            problems.append(f"step {t}: illegal column {action}")
            break
        drop_piece(board, int(action), AGENT)
        if t + 1 < traj.length:
            nxt = traj.states[t + 1].reshape(ROWS, COLS).astype(np.int64)
            diff = nxt - board
            placed = np.argwhere(diff != 0)
            if len(placed) != 1 or diff[tuple(placed[0])] != OPPONENT:
                problems.append(f"step {t}: next board is not one opponent move away")
                break
            r, c = placed[0]
            if r + 1 < ROWS and board[r + 1, c] == 0:
                problems.append(f"step {t}: opponent piece at ({r}, {c}) is floating")
                break
    return problems
